//! Linear precoder optimization in the reduced variables `X_k`, `P_k = H^H X_k`.
//!
//! Working with `X_k` (`K N_r × N_r`) instead of `P_k` (`N_t × N_r`) makes the
//! per-iteration cost independent of `N_t` once `H̄ = H H^H` is formed.

use crate::config::{DinkelbachSettings, FallbackSettings};
use crate::error::Result;
use crate::fractional::{self, ScaProblem, Solution};
use crate::linalg::{eye, gram, hermitian_part, inv_hpd, logdet_hpd, lstsq, norm_sqr, solve_hpd, trace_re, CMat};
use crate::objectives::ReducedChannel;

/// Which closed form applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpBranch {
    /// `K N_r ≤ N_t`: `H̄` is invertible and the system is solved directly.
    Square,
    /// `K N_r > N_t`: minimum-norm least squares through `H^H`.
    Tall,
}

impl LpBranch {
    pub fn for_dims(users: usize, n_r: usize, n_t: usize) -> LpBranch {
        if users * n_r <= n_t {
            LpBranch::Square
        } else {
            LpBranch::Tall
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpScaTerms {
    pub zhat: Vec<CMat>,
    pub yhat: Vec<CMat>,
    pub a: Vec<CMat>,
    /// `Σ_k H̄_k^H A_k H̄_k`.
    pub weight: CMat,
    /// `Σ_k H_k^H A_k H̄_k`.
    pub weight_tall: CMat,
    /// `H̄_j^H Ŷ_j^{-1} Ẑ_j`.
    pub rhs: Vec<CMat>,
    /// `H_j^H Ŷ_j^{-1} Ẑ_j`.
    pub rhs_tall: Vec<CMat>,
    pub c: f64,
    /// Sum-rate at the expansion point.
    pub rate: f64,
}

pub fn lp_sca_terms(x: &[CMat], r: &ReducedChannel) -> Result<LpScaTerms> {
    let k = r.users();
    let nr = r.n_r;
    let dim = r.hbar.nrows();
    let nt = r.n_t();
    let mut out = LpScaTerms {
        zhat: Vec::with_capacity(k),
        yhat: Vec::with_capacity(k),
        a: Vec::with_capacity(k),
        weight: CMat::zeros(dim, dim),
        weight_tall: CMat::zeros(nt, dim),
        rhs: Vec::with_capacity(k),
        rhs_tall: Vec::with_capacity(k),
        c: 0.0,
        rate: 0.0,
    };
    for u in 0..k {
        let hk = &r.hbar_k[u];
        let mut y = eye(nr);
        for (j, xj) in x.iter().enumerate() {
            if j != u {
                y += gram(&(hk * xj).adjoint());
            }
        }
        let z = hk * &x[u];
        let full = &y + &z * z.adjoint();
        let yinv = inv_hpd(&y)?;
        let a = hermitian_part(&(&yinv - inv_hpd(&full)?));
        let rate = logdet_hpd(&full)? - logdet_hpd(&y)?;
        let yz = &yinv * &z;
        out.c += rate - trace_re(&(z.adjoint() * &yz)) - trace_re(&a);
        out.rate += rate;
        let h_u = r.h(u);
        out.weight += hk.adjoint() * &a * hk;
        out.weight_tall += h_u.adjoint() * &a * hk;
        out.rhs.push(hk.adjoint() * &yz);
        out.rhs_tall.push(h_u.adjoint() * &yz);
        out.zhat.push(z);
        out.yhat.push(y);
        out.a.push(a);
    }
    out.weight = hermitian_part(&out.weight);
    Ok(out)
}

/// Sum over users of the rate lower bound `L_k(X)` expanded at `terms`.
pub fn lp_surrogate(terms: &LpScaTerms, x: &[CMat]) -> f64 {
    let mut v = terms.c;
    for (xj, rj) in x.iter().zip(&terms.rhs) {
        v += 2.0 * (rj.adjoint() * xj).trace().re - trace_re(&(xj.adjoint() * &terms.weight * xj));
    }
    v
}

#[derive(Debug, Clone)]
pub struct XUpdate {
    pub x: Vec<CMat>,
    pub branch: LpBranch,
    /// The tall-branch system matrix was numerically rank deficient.
    pub rank_deficient: bool,
}

fn stack_columns(blocks: &[CMat]) -> CMat {
    let nr = blocks[0].ncols();
    let mut out = CMat::zeros(blocks[0].nrows(), blocks.len() * nr);
    for (j, b) in blocks.iter().enumerate() {
        out.columns_mut(j * nr, nr).copy_from(b);
    }
    out
}

pub fn dinkelbach_update_x_with(
    branch: LpBranch,
    lambda: f64,
    terms: &LpScaTerms,
    r: &ReducedChannel,
) -> Result<XUpdate> {
    let k = terms.rhs.len();
    match branch {
        LpBranch::Square => {
            let m = &terms.weight + r.hbar.scale(lambda);
            let nr = r.n_r;
            let sol = solve_hpd(&m, &stack_columns(&terms.rhs))?;
            let x = (0..k).map(|j| sol.columns(j * nr, nr).into_owned()).collect();
            Ok(XUpdate { x, branch, rank_deficient: false })
        }
        LpBranch::Tall => {
            let m = &terms.weight_tall + r.h_stack.adjoint().scale(lambda);
            let nr = r.n_r;
            let (sol, rank) = lstsq(&m, &stack_columns(&terms.rhs_tall))?;
            let x = (0..k).map(|j| sol.columns(j * nr, nr).into_owned()).collect();
            Ok(XUpdate { x, branch, rank_deficient: rank < m.nrows().min(m.ncols()) })
        }
    }
}

/// Closed-form maximizer of `Σ_k L_k(X) − λ Σ_k tr(H̄ X_k X_k^H)`.
pub fn dinkelbach_update_x(lambda: f64, terms: &LpScaTerms, r: &ReducedChannel) -> Result<XUpdate> {
    dinkelbach_update_x_with(LpBranch::for_dims(r.users(), r.n_r, r.n_t()), lambda, terms, r)
}

/// Least-squares reduced variables reproducing `precoders` as closely as `H^H X` allows.
pub fn x_from_precoders(r: &ReducedChannel, precoders: &[CMat]) -> Result<Vec<CMat>> {
    let hh = r.h_stack.adjoint();
    precoders.iter().map(|p| Ok(lstsq(&hh, p)?.0)).collect()
}

/// `P_k = √(P_max/(K N_t))` times the first `N_r` columns of the identity.
pub fn uniform_precoders(users: usize, n_r: usize, n_t: usize, p_max: f64) -> Vec<CMat> {
    let a = (p_max / (users * n_t) as f64).sqrt();
    vec![CMat::identity(n_t, n_r).scale(a); users]
}

pub struct LpProblem<'a> {
    pub r: &'a ReducedChannel,
}

impl ScaProblem for LpProblem<'_> {
    type Point = Vec<CMat>;
    type Terms = LpScaTerms;

    fn rate(&self, x: &Vec<CMat>) -> Result<f64> {
        self.r.sum_rate(x)
    }

    fn power(&self, x: &Vec<CMat>) -> f64 {
        self.r.transmit_power(x)
    }

    fn expand(&self, x: &Vec<CMat>) -> Result<LpScaTerms> {
        lp_sca_terms(x, self.r)
    }

    fn update(&self, terms: &LpScaTerms, multiplier: f64) -> Result<Vec<CMat>> {
        Ok(dinkelbach_update_x(multiplier, terms, self.r)?.x)
    }

    fn scale(&self, x: &Vec<CMat>, factor: f64) -> Vec<CMat> {
        x.iter().map(|xk| xk.scale(factor)).collect()
    }

    fn linear_norm_sqr(&self, terms: &LpScaTerms) -> f64 {
        terms.rhs_tall.iter().map(norm_sqr).sum()
    }
}

pub type LpSolution = Solution<Vec<CMat>>;

pub fn optimize_x_unconstrained(
    r: &ReducedChannel,
    x0: Vec<CMat>,
    static_power: f64,
    settings: &DinkelbachSettings,
) -> Result<LpSolution> {
    fractional::dinkelbach(&LpProblem { r }, x0, static_power, settings)
}

/// Sum-rate maximization under `Σ_k tr(H̄ X_k X_k^H) ≤ p_max` from `start`
/// rescaled onto the budget.
pub fn constrained_sum_rate_max_lp(
    r: &ReducedChannel,
    p_max: f64,
    start: &[CMat],
    settings: &FallbackSettings,
) -> Result<(Vec<CMat>, Vec<f64>)> {
    let problem = LpProblem { r };
    let x = problem.scale(&start.to_vec(), (p_max / r.transmit_power(start)).sqrt());
    let (x, trace, _) = fractional::constrained_rate_max(&problem, x, p_max, settings)?;
    Ok((x, trace))
}

/// EE-optimal reduced variables, falling back to the constrained sum-rate
/// problem when the budget binds. The fallback may also start from `x0`.
/// Recover precoders with [`ReducedChannel::recover`].
pub fn optimize_precoders(
    r: &ReducedChannel,
    x0: Vec<CMat>,
    p_max: f64,
    static_power: f64,
    settings: &DinkelbachSettings,
    fallback: &FallbackSettings,
) -> Result<LpSolution> {
    let warm = x0.clone();
    fractional::optimize(&LpProblem { r }, x0, static_power, p_max, settings, fallback, Some(&warm))
}
