//! Dual-MAC covariance optimization for fixed SIM phases.
//!
//! Covariances are parameterized as `S_k = U_k^H U_k`. The sum-rate is
//! lower-bounded around the current factors by an SCA surrogate built from the
//! rank-`N_r` downdate chain `Ŷ_{j-1} = Ŷ_j + V̂_j^H V̂_j`, `Ŷ_K = I`.

use crate::config::{DinkelbachSettings, FallbackSettings};
use crate::error::Result;
use crate::fractional::{self, ScaProblem, Solution};
use crate::linalg::{eye, hermitian_part, inv_hpd, logdet_hpd, norm_sqr, psd_sqrt, trace_re, CMat};
use crate::objectives::CovarianceSet;

/// Factors `U_k` with `S_k = U_k^H U_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub u: Vec<CMat>,
}

impl FactorSet {
    pub fn from_covariances(s: &CovarianceSet) -> FactorSet {
        FactorSet { u: s.s.iter().map(psd_sqrt).collect() }
    }

    pub fn covariances(&self) -> CovarianceSet {
        CovarianceSet { s: self.u.iter().map(|u| hermitian_part(&(u.adjoint() * u))).collect() }
    }

    pub fn transmit_power(&self) -> f64 {
        self.u.iter().map(norm_sqr).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ScaTerms {
    pub vhat: Vec<CMat>,
    /// `yinv[j]` is `Ŷ_j^{-1}` for `j = 0..=K`; `yinv[K] = I`.
    pub yinv: Vec<CMat>,
    /// `A_j = Ŷ_j^{-1} − Ŷ_{j-1}^{-1}`, stored for `j = 1..=K` at index `j − 1`.
    pub a: Vec<CMat>,
    pub b: Vec<CMat>,
    pub bbar: Vec<CMat>,
    /// Quadratic weights `H_j (Σ_{l≤j} A_l) H_j^H`.
    pub m: Vec<CMat>,
    pub c: f64,
    /// `h` at the expansion point.
    pub rate: f64,
}

pub fn sca_terms(u: &FactorSet, h: &[CMat]) -> Result<ScaTerms> {
    let k = h.len();
    let nt = h[0].ncols();
    let nr = h[0].nrows();
    let vhat: Vec<CMat> = u.u.iter().zip(h).map(|(uk, hk)| uk * hk).collect();
    let mut yinv = vec![eye(nt); k + 1];
    let mut bbar = vec![CMat::zeros(nr, nt); k];
    let mut rate = 0.0;
    let mut c = 0.0;
    for j in (1..=k).rev() {
        let bj = &vhat[j - 1] * &yinv[j];
        let pivot = eye(nr) + &bj * vhat[j - 1].adjoint();
        rate += logdet_hpd(&pivot)?;
        c -= trace_re(&pivot) - nr as f64;
        yinv[j - 1] = hermitian_part(&(&yinv[j] - bj.adjoint() * inv_hpd(&pivot)? * &bj));
        bbar[j - 1] = bj;
    }
    let a: Vec<CMat> = (1..=k).map(|j| &yinv[j] - &yinv[j - 1]).collect();
    c += rate - a.iter().map(trace_re).sum::<f64>();
    let b = bbar.iter().zip(h).map(|(bb, hk)| bb * hk.adjoint()).collect();
    let mut acc = CMat::zeros(nt, nt);
    let m = a
        .iter()
        .zip(h)
        .map(|(aj, hj)| {
            acc += aj;
            hermitian_part(&(hj * &acc * hj.adjoint()))
        })
        .collect();
    Ok(ScaTerms { vhat, yinv, a, b, bbar, m, c, rate })
}

/// Surrogate `h̄(U'; U)` for the expansion encoded in `terms`.
pub fn surrogate(terms: &ScaTerms, u: &FactorSet) -> f64 {
    let mut v = terms.c;
    for ((uk, bk), mk) in u.u.iter().zip(&terms.b).zip(&terms.m) {
        v += 2.0 * (bk * uk.adjoint()).trace().re - trace_re(&(uk * mk * uk.adjoint()));
    }
    v
}

/// `U_j = B_j (H_j Σ_{l≤j} A_l^H H_j^H + λ I)^{-1}` for every user.
pub fn dinkelbach_update_u(lambda: f64, terms: &ScaTerms) -> Result<FactorSet> {
    let u = terms
        .b
        .iter()
        .zip(&terms.m)
        .map(|(bj, mj)| {
            let reg = mj + eye(mj.nrows()).scale(lambda);
            // U^H = R^{-1} B^H since R is Hermitian
            Ok((inv_hpd(&reg)? * bj.adjoint()).adjoint())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorSet { u })
}

/// The dual-MAC problem for fixed channels.
pub struct DpcProblem<'a> {
    pub h: &'a [CMat],
}

impl ScaProblem for DpcProblem<'_> {
    type Point = FactorSet;
    type Terms = ScaTerms;

    fn rate(&self, x: &FactorSet) -> Result<f64> {
        crate::objectives::mac_sum_rate(&x.covariances(), self.h)
    }

    fn power(&self, x: &FactorSet) -> f64 {
        x.transmit_power()
    }

    fn expand(&self, x: &FactorSet) -> Result<ScaTerms> {
        sca_terms(x, self.h)
    }

    fn update(&self, terms: &ScaTerms, multiplier: f64) -> Result<FactorSet> {
        dinkelbach_update_u(multiplier, terms)
    }

    fn scale(&self, x: &FactorSet, factor: f64) -> FactorSet {
        FactorSet { u: x.u.iter().map(|u| u.scale(factor)).collect() }
    }

    fn linear_norm_sqr(&self, terms: &ScaTerms) -> f64 {
        terms.b.iter().map(norm_sqr).sum()
    }
}

/// Result of a covariance optimization.
pub type DpcSolution = Solution<FactorSet>;

pub fn optimize_covariances_unconstrained(
    h: &[CMat],
    s0: &CovarianceSet,
    static_power: f64,
    settings: &DinkelbachSettings,
) -> Result<DpcSolution> {
    fractional::dinkelbach(&DpcProblem { h }, FactorSet::from_covariances(s0), static_power, settings)
}

/// Sum-rate maximization under `Σ tr(S_k) ≤ p_max`, started from `start`
/// rescaled onto the budget.
pub fn constrained_sum_rate_max(
    h: &[CMat],
    p_max: f64,
    start: &CovarianceSet,
    settings: &FallbackSettings,
) -> Result<(CovarianceSet, Vec<f64>)> {
    let problem = DpcProblem { h };
    let f = FactorSet::from_covariances(start);
    let f = problem.scale(&f, (p_max / f.transmit_power()).sqrt());
    let (x, trace, _) = fractional::constrained_rate_max(&problem, f, p_max, settings)?;
    Ok((x.covariances(), trace))
}

/// Unconstrained EE maximizer if it respects `p_max`, otherwise the
/// power-constrained sum-rate fallback, optionally seeded with `warm`.
pub fn optimize_covariances(
    h: &[CMat],
    p_max: f64,
    static_power: f64,
    s0: &CovarianceSet,
    warm: Option<&CovarianceSet>,
    settings: &DinkelbachSettings,
    fallback: &FallbackSettings,
) -> Result<DpcSolution> {
    let warm = warm.map(FactorSet::from_covariances);
    fractional::optimize(
        &DpcProblem { h },
        FactorSet::from_covariances(s0),
        static_power,
        p_max,
        settings,
        fallback,
        warm.as_ref(),
    )
}
