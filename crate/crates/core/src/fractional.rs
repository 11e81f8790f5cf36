//! Shared Dinkelbach/SCA driver and the power-constrained SCA fallback.
//!
//! Both digital optimizers maximize `rate(x) / (power(x) + P_static)` where
//! the SCA surrogate of `rate` admits a closed-form maximizer of
//! `surrogate(x) − μ·power(x)` for every multiplier `μ ≥ 0`.

use crate::config::{DinkelbachSettings, FallbackSettings};
use crate::error::{Error, Result};

pub trait ScaProblem {
    type Point: Clone;
    type Terms;

    /// Exact rate in nats.
    fn rate(&self, x: &Self::Point) -> Result<f64>;
    fn power(&self, x: &Self::Point) -> f64;
    fn expand(&self, x: &Self::Point) -> Result<Self::Terms>;
    /// Maximizer of the surrogate at `terms` minus `multiplier · power`.
    fn update(&self, terms: &Self::Terms, multiplier: f64) -> Result<Self::Point>;
    /// Multiplies the point so the power scales by `factor²`.
    fn scale(&self, x: &Self::Point, factor: f64) -> Self::Point;
    /// Squared norm of the linear surrogate coefficients; bounds the power at a multiplier.
    fn linear_norm_sqr(&self, terms: &Self::Terms) -> f64;
}

/// Outcome of one digital optimization.
#[derive(Debug, Clone)]
pub struct Solution<P> {
    pub point: P,
    pub rate: f64,
    pub power: f64,
    /// Closed-form Dinkelbach updates evaluated.
    pub updates: usize,
    /// Re-expansions spent by the constrained fallback.
    pub fallback_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    /// The power budget was active and the fallback was used.
    pub constrained: bool,
    /// Ratio after every accepted Dinkelbach iterate, starting point included.
    pub ratio_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    /// Rates of the fallback iterates.
    pub fallback_trace: Vec<f64>,
}

/// Nested Dinkelbach (outer, on λ) and SCA (inner, at fixed λ) iteration.
///
/// An inner step is kept only when it does not lower the ratio, which makes the
/// ratio sequence non-decreasing.
pub fn dinkelbach<Pr: ScaProblem>(
    problem: &Pr,
    start: Pr::Point,
    static_power: f64,
    settings: &DinkelbachSettings,
) -> Result<Solution<Pr::Point>> {
    let ratio = |rate: f64, power: f64| rate / (power + static_power);
    let mut x = start;
    let mut rate = problem.rate(&x)?;
    let mut power = problem.power(&x);
    let mut g = ratio(rate, power);
    let mut lambda = g;
    let mut ratio_trace = vec![g];
    let mut lambda_trace = vec![lambda];
    let mut updates = 0;
    let mut outer = 0;
    let mut converged = false;

    while outer < settings.max_outer {
        outer += 1;
        let mut f = rate - lambda * (power + static_power);
        for _ in 0..settings.max_inner {
            let terms = problem.expand(&x)?;
            let cand = problem.update(&terms, lambda)?;
            updates += 1;
            let (cr, cp) = (problem.rate(&cand)?, problem.power(&cand));
            let cg = ratio(cr, cp);
            if !(cg >= g) {
                break;
            }
            x = cand;
            rate = cr;
            power = cp;
            g = cg;
            ratio_trace.push(g);
            let cf = rate - lambda * (power + static_power);
            let gain = cf - f;
            f = cf;
            if gain <= settings.eps_inner {
                break;
            }
        }
        let delta = g - lambda;
        lambda = g;
        lambda_trace.push(lambda);
        if delta <= settings.eps_outer {
            converged = true;
            break;
        }
    }

    Ok(Solution {
        point: x,
        rate,
        power,
        updates,
        fallback_iterations: 0,
        outer_iterations: outer,
        converged,
        constrained: false,
        ratio_trace,
        lambda_trace,
        fallback_trace: Vec::new(),
    })
}

/// Closed-form surrogate maximizer whose power matches `budget`, found by
/// bisection on the multiplier. Returns the point and the multiplier.
pub fn power_matched_update<Pr: ScaProblem>(
    problem: &Pr,
    terms: &Pr::Terms,
    budget: f64,
    settings: &FallbackSettings,
) -> Result<(Pr::Point, f64)> {
    let at = |mu: f64| -> Result<(Pr::Point, f64)> {
        let x = problem.update(terms, mu)?;
        let p = problem.power(&x);
        Ok((x, p))
    };
    if let Ok((x0, p0)) = at(0.0) {
        if p0.is_finite() && p0 <= budget {
            return Ok((x0, 0.0));
        }
    }
    let mut hi = (problem.linear_norm_sqr(terms) / budget).sqrt();
    let (mut x_hi, mut p_hi) = at(hi)?;
    if !(p_hi <= budget) {
        // the analytic bound is exact only up to rounding
        for _ in 0..60 {
            hi *= 2.0;
            (x_hi, p_hi) = at(hi)?;
            if p_hi <= budget {
                break;
            }
        }
        if !(p_hi <= budget) {
            return Err(Error::Bracket { target: budget, low: f64::INFINITY, high: p_hi });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if (budget - p_hi) <= settings.power_tolerance * budget || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match at(mid) {
            Ok((x, p)) if p <= budget => {
                hi = mid;
                x_hi = x;
                p_hi = p;
            }
            _ => lo = mid,
        }
    }
    Ok((x_hi, hi))
}

/// SCA for `max rate(x)` subject to `power(x) ≤ budget`, each step solving the
/// surrogate problem through [`power_matched_update`]. `start` must be feasible.
pub fn constrained_rate_max<Pr: ScaProblem>(
    problem: &Pr,
    start: Pr::Point,
    budget: f64,
    settings: &FallbackSettings,
) -> Result<(Pr::Point, Vec<f64>, usize)> {
    let mut x = start;
    let mut rate = problem.rate(&x)?;
    let mut trace = vec![rate];
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        let terms = problem.expand(&x)?;
        let (cand, _) = power_matched_update(problem, &terms, budget, settings)?;
        iterations += 1;
        let cr = problem.rate(&cand)?;
        if !(cr >= rate) {
            break;
        }
        let gain = cr - rate;
        x = cand;
        rate = cr;
        trace.push(rate);
        if gain <= settings.rate_tolerance * rate.abs().max(1.0) {
            break;
        }
    }
    Ok((x, trace, iterations))
}

/// Dinkelbach solution, replaced by the constrained fallback when its power
/// exceeds `budget`. The fallback starts from the rescaled Dinkelbach point or
/// from `warm` (if feasible), whichever has the higher rate.
pub fn optimize<Pr: ScaProblem>(
    problem: &Pr,
    start: Pr::Point,
    static_power: f64,
    budget: f64,
    dinkelbach_settings: &DinkelbachSettings,
    fallback: &FallbackSettings,
    warm: Option<&Pr::Point>,
) -> Result<Solution<Pr::Point>> {
    let mut sol = dinkelbach(problem, start, static_power, dinkelbach_settings)?;
    if sol.power <= budget {
        return Ok(sol);
    }
    let mut from = problem.scale(&sol.point, (budget / sol.power).sqrt());
    if let Some(w) = warm {
        if problem.power(w) <= budget && problem.rate(w)? > problem.rate(&from)? {
            from = w.clone();
        }
    }
    let (x, trace, iterations) = constrained_rate_max(problem, from, budget, fallback)?;
    sol.rate = problem.rate(&x)?;
    sol.power = problem.power(&x);
    sol.point = x;
    sol.fallback_iterations = iterations;
    sol.constrained = true;
    sol.fallback_trace = trace;
    Ok(sol)
}
