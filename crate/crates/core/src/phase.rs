//! Projected gradient ascent over the unit-modulus SIM phases.
//!
//! Gradients follow the convention `∇ = ∂f/∂φ* = ½(∂/∂Re + j∂/∂Im)`, so a real
//! perturbation `h` of `Re φ_i` changes the objective by `2 Re(∇_i) h`.
//! Both objectives depend on the phases only through `B`; each supplies
//! `Q = ∂f/∂B*` and the layer gradients are obtained by one forward and one
//! backward sweep through the stack.

use std::f64::consts::PI;

use crate::channel::SimStack;
use crate::error::{Error, Result};
use crate::linalg::{inv_hpd, scale_rows, CMat, C64, ONE};
use crate::objectives::{lp_covariances, CovarianceSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub initial_step: f64,
    /// Step shrink factor ρ in (0, 1).
    pub shrink: f64,
    /// Sufficient-increase coefficient δ.
    pub sufficient_increase: f64,
    /// Below this step the search gives up and reports a stall.
    pub min_step: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            initial_step: 1000.0,
            shrink: 0.5,
            sufficient_increase: 1e-3,
            min_step: 1e-12,
        }
    }
}

/// Maps every entry onto the unit circle; zeros go to `1`.
pub fn project_unit_modulus(v: &[C64]) -> Vec<C64> {
    v.iter()
        .map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                ONE
            }
        })
        .collect()
}

/// Snaps every phase to the nearest of `2^bits` uniform levels `2πm/2^bits`.
/// Ties resolve to the lower level.
pub fn quantize_phases(phases: &[C64], bits: u32) -> Result<Vec<C64>> {
    if bits == 0 || bits > 30 {
        return Err(Error::Domain(format!("quantization needs 1..=30 bits, got {bits}")));
    }
    let levels = 1u64 << bits;
    let delta = 2.0 * PI / levels as f64;
    Ok(phases
        .iter()
        .map(|z| {
            let theta = z.arg().rem_euclid(2.0 * PI);
            let m = ((theta / delta - 0.5).ceil() as i64).rem_euclid(levels as i64);
            C64::from_polar(1.0, delta * m as f64)
        })
        .collect())
}

/// `Σ_n |a_n − b_n|²`.
pub fn distance_sqr(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Phase gradient from `Q = ∂f/∂B*` (`N × N_t`).
pub fn gradient_from_q(stack: &SimStack, phases: &[C64], q: &CMat) -> Vec<C64> {
    let n = stack.elements();
    let layers = stack.layers();
    // y[l] = W^{l+1} F_l with F_0 = I, F_l = Φ^l y[l-1]
    let mut y = Vec::with_capacity(layers);
    let mut f: Option<CMat> = None;
    for l in 1..=layers {
        let w = stack.propagation(l);
        let yl = match &f {
            None => w.clone(),
            Some(prev) => w * prev,
        };
        f = Some(scale_rows(&phases[(l - 1) * n..l * n], &yl));
        y.push(yl);
    }

    let mut grad = vec![C64::new(0.0, 0.0); n * layers];
    let mut z = q.clone();
    for l in (1..=layers).rev() {
        let yl = &y[l - 1];
        for i in 0..n {
            grad[(l - 1) * n + i] = z.row(i).iter().zip(yl.row(i).iter()).map(|(a, b)| a * b.conj()).sum();
        }
        if l > 1 {
            let conj_phi: Vec<C64> = phases[(l - 1) * n..l * n].iter().map(|p| p.conj()).collect();
            z = stack.propagation(l).adjoint() * scale_rows(&conj_phi, &z);
        }
    }
    grad
}

/// `∂/∂B*` of `ln|I + Σ_k H_k^H S_k H_k|` with `H_k = Gn_k B`.
pub fn q_dpc(gn: &[CMat], h: &[CMat], s: &CovarianceSet) -> Result<CMat> {
    let nt = h[0].ncols();
    let mut d = CMat::identity(nt, nt);
    for (hk, sk) in h.iter().zip(&s.s) {
        d += hk.adjoint() * sk * hk;
    }
    let dinv = inv_hpd(&d)?;
    let mut q = CMat::zeros(gn[0].ncols(), nt);
    for ((g, hk), sk) in gn.iter().zip(h).zip(&s.s) {
        q += g.adjoint() * (sk * hk * &dinv);
    }
    Ok(q)
}

/// `∂/∂B*` of `Σ_k ln|F_{1,k}| − ln|F_{2,k}|` for precoders `P_k`.
pub fn q_lp(gn: &[CMat], h: &[CMat], precoders: &[CMat]) -> Result<CMat> {
    let (total, per_user) = lp_covariances(precoders);
    let nr = h[0].nrows();
    let mut q = CMat::zeros(gn[0].ncols(), h[0].ncols());
    for (k, (g, hk)) in gn.iter().zip(h).enumerate() {
        let hs = hk * &total;
        let hi = hk * &per_user[k];
        let f1 = CMat::identity(nr, nr) + &hs * hk.adjoint();
        let f2 = CMat::identity(nr, nr) + &hi * hk.adjoint();
        let e = inv_hpd(&f1)? * hs - inv_hpd(&f2)? * hi;
        q += g.adjoint() * e;
    }
    Ok(q)
}

pub fn grad_phi_dpc(stack: &SimStack, phases: &[C64], gn: &[CMat], s: &CovarianceSet) -> Result<Vec<C64>> {
    let b = stack.response_for(phases);
    let h: Vec<CMat> = gn.iter().map(|g| g * &b).collect();
    Ok(gradient_from_q(stack, phases, &q_dpc(gn, &h, s)?))
}

pub fn grad_phi_lp(stack: &SimStack, phases: &[C64], gn: &[CMat], precoders: &[CMat]) -> Result<Vec<C64>> {
    let b = stack.response_for(phases);
    let h: Vec<CMat> = gn.iter().map(|g| g * &b).collect();
    Ok(gradient_from_q(stack, phases, &q_lp(gn, &h, precoders)?))
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub phases: Vec<C64>,
    pub value: f64,
    /// Accepted step size (the last one tried when stalled).
    pub step: f64,
    /// Objective evaluations spent by the search.
    pub evaluations: usize,
    /// `f(φ') − f(φ) − δ‖φ' − φ‖²` at the accepted point.
    pub margin: f64,
    pub stalled: bool,
}

/// One backtracking ascent step `φ' = P(φ + u∇)`, shrinking `u` until
/// `f(φ') ≥ f(φ) + δ‖φ' − φ‖²`.
pub fn phase_ascent_step<F>(
    phases: &[C64],
    gradient: &[C64],
    value: f64,
    params: &LineSearchParams,
    mut objective: F,
) -> Result<StepOutcome>
where
    F: FnMut(&[C64]) -> Result<f64>,
{
    let mut step = params.initial_step;
    let mut evaluations = 0;
    while step >= params.min_step {
        let moved: Vec<C64> = phases.iter().zip(gradient).map(|(p, g)| p + g * step).collect();
        let cand = project_unit_modulus(&moved);
        let fc = objective(&cand)?;
        evaluations += 1;
        let margin = fc - value - params.sufficient_increase * distance_sqr(&cand, phases);
        if margin >= 0.0 {
            return Ok(StepOutcome { phases: cand, value: fc, step, evaluations, margin, stalled: false });
        }
        step *= params.shrink;
    }
    Ok(StepOutcome {
        phases: phases.to_vec(),
        value,
        step,
        evaluations,
        margin: 0.0,
        stalled: true,
    })
}
