//! Alternating optimization of the digital part and the SIM phases.

use crate::channel::{ChannelRealization, SimStack};
use crate::config::SystemConfig;
use crate::dpc::optimize_covariances;
use crate::error::Result;
use crate::lin::{optimize_precoders, uniform_precoders, x_from_precoders};
use crate::linalg::{CMat, C64};
use crate::objectives::{ee, lp_sum_rate, lp_transmit_power, mac_sum_rate, reduce_problem, CovarianceSet, PowerModel};
use crate::phase::{gradient_from_q, phase_ascent_step, q_dpc, q_lp};

/// State after one AO iteration (iteration 0 is the starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct AoRecord {
    pub iteration: usize,
    pub ee: f64,
    /// Sum-rate in nats per channel use.
    pub rate: f64,
    pub tx_power: f64,
    /// Closed-form Dinkelbach updates spent in this iteration.
    pub digital_updates: usize,
    /// Re-expansions of the power-constrained fallback in this iteration.
    pub fallback_iterations: usize,
    /// Objective evaluations spent by the phase line search.
    pub phase_evaluations: usize,
    pub stalled: bool,
    /// The digital update was rejected because it lowered the EE.
    pub digital_kept: bool,
}

#[derive(Debug, Clone)]
pub struct AoRun<D> {
    pub records: Vec<AoRecord>,
    pub converged: bool,
    pub digital: D,
    pub phases: Vec<C64>,
}

impl<D> AoRun<D> {
    pub fn last(&self) -> &AoRecord {
        self.records.last().expect("AO run has at least the starting record")
    }

    /// Digital updates and line-search evaluations per iteration, averaged over
    /// the iterations needed to first reach `fraction` of the final EE.
    pub fn average_counts(&self, fraction: f64) -> (f64, f64) {
        let target = fraction * self.last().ee;
        let steps = &self.records[1..];
        if steps.is_empty() {
            return (0.0, 0.0);
        }
        let upto = steps.iter().position(|r| r.ee >= target).unwrap_or(steps.len() - 1) + 1;
        let used = &steps[..upto];
        let n = used.len() as f64;
        (
            used.iter().map(|r| r.digital_updates as f64).sum::<f64>() / n,
            used.iter().map(|r| r.phase_evaluations as f64).sum::<f64>() / n,
        )
    }

    pub fn total_digital_updates(&self) -> usize {
        self.records.iter().map(|r| r.digital_updates).sum()
    }

    pub fn total_fallback_iterations(&self) -> usize {
        self.records.iter().map(|r| r.fallback_iterations).sum()
    }

    pub fn total_phase_evaluations(&self) -> usize {
        self.records.iter().map(|r| r.phase_evaluations).sum()
    }
}

/// How the linear precoders are chosen in each AO iteration.
#[derive(Debug, Clone)]
pub enum LpDigital {
    Optimize,
    /// Held fixed; only the phases move.
    Fixed(Vec<CMat>),
}

struct PhaseResult {
    rate: f64,
    evaluations: usize,
    stalled: bool,
}

fn phase_update<F, Q>(
    cfg: &SystemConfig,
    stack: &mut SimStack,
    real: &mut ChannelRealization,
    rate: f64,
    q_of: Q,
    rate_of: F,
) -> Result<PhaseResult>
where
    Q: Fn(&[CMat], &[CMat]) -> Result<CMat>,
    F: Fn(&[CMat]) -> Result<f64>,
{
    let gn = real.g_normalized();
    let phases = stack.phases().to_vec();
    let grad = gradient_from_q(stack, &phases, &q_of(&gn, &real.h)?);
    let out = phase_ascent_step(&phases, &grad, rate, &cfg.line_search, |p| {
        rate_of(&real.end_to_end(&stack.response_for(p)))
    })?;
    let mut rate = rate;
    if !out.stalled {
        stack.set_phases(out.phases);
        real.refresh(stack.response());
        rate = rate_of(&real.h)?;
    }
    Ok(PhaseResult { rate, evaluations: out.evaluations, stalled: out.stalled })
}

fn improved(prev: f64, next: f64, tolerance: f64) -> bool {
    next - prev > tolerance * prev.abs()
}

/// DPC scheme: covariance optimization alternated with phase ascent. Without
/// a stack the channel in `real` is used as is and only the covariances move.
pub fn run_ao_dpc(
    cfg: &SystemConfig,
    model: &PowerModel,
    mut stack: Option<&mut SimStack>,
    real: &mut ChannelRealization,
) -> Result<AoRun<CovarianceSet>> {
    let s0 = CovarianceSet::uniform(real.users(), cfg.n_r, model.p_max);
    let static_power = model.static_power();
    let mut s = s0.clone();
    let mut power = s.transmit_power();
    let mut rate = mac_sum_rate(&s, &real.h)?;
    let mut value = ee(rate, power, model)?;
    let mut records = vec![AoRecord {
        iteration: 0,
        ee: value,
        rate,
        tx_power: power,
        digital_updates: 0,
        fallback_iterations: 0,
        phase_evaluations: 0,
        stalled: false,
        digital_kept: false,
    }];
    let mut converged = false;
    for it in 1..=cfg.ao.max_iterations {
        let sol = optimize_covariances(&real.h, model.p_max, static_power, &s0, Some(&s), &cfg.dpc, &cfg.fallback)?;
        let cand = sol.point.covariances();
        let cand_rate = mac_sum_rate(&cand, &real.h)?;
        let cand_power = cand.transmit_power();
        let kept = !(ee(cand_rate, cand_power, model)? >= ee(rate, power, model)?);
        if !kept {
            s = cand;
            rate = cand_rate;
            power = cand_power;
        }
        let mut phase = PhaseResult { rate, evaluations: 0, stalled: false };
        if let Some(stack) = stack.as_deref_mut() {
            let sc = s.clone();
            phase = phase_update(cfg, stack, real, rate, |gn, h| q_dpc(gn, h, &sc), |h| mac_sum_rate(&sc, h))?;
            rate = phase.rate;
        }
        let next = ee(rate, power, model)?;
        records.push(AoRecord {
            iteration: it,
            ee: next,
            rate,
            tx_power: power,
            digital_updates: sol.updates,
            fallback_iterations: sol.fallback_iterations,
            phase_evaluations: phase.evaluations,
            stalled: phase.stalled,
            digital_kept: kept,
        });
        let go_on = stack.is_some() && improved(value, next, cfg.ao.tolerance);
        value = next;
        if !go_on {
            converged = true;
            break;
        }
    }
    let phases = stack.map(|s| s.phases().to_vec()).unwrap_or_default();
    Ok(AoRun { records, converged, digital: s, phases })
}

/// Linear-precoding schemes. With [`LpDigital::Optimize`] the precoders are
/// re-optimized each iteration from the previous ones.
pub fn run_ao_lp(
    cfg: &SystemConfig,
    model: &PowerModel,
    mut stack: Option<&mut SimStack>,
    real: &mut ChannelRealization,
    digital: &LpDigital,
) -> Result<AoRun<Vec<CMat>>> {
    let users = real.users();
    let nt = real.h[0].ncols();
    let static_power = model.static_power();
    let mut p = match digital {
        LpDigital::Optimize => uniform_precoders(users, cfg.n_r, nt, model.p_max),
        LpDigital::Fixed(p) => p.clone(),
    };
    let mut power = lp_transmit_power(&p);
    let mut rate = lp_sum_rate(&p, &real.h)?;
    let mut value = ee(rate, power, model)?;
    let mut records = vec![AoRecord {
        iteration: 0,
        ee: value,
        rate,
        tx_power: power,
        digital_updates: 0,
        fallback_iterations: 0,
        phase_evaluations: 0,
        stalled: false,
        digital_kept: false,
    }];
    let mut converged = false;
    for it in 1..=cfg.ao.max_iterations {
        let mut updates = 0;
        let mut fallback_iterations = 0;
        let mut kept = false;
        if let LpDigital::Optimize = digital {
            let r = reduce_problem(&real.h);
            let x0 = x_from_precoders(&r, &p)?;
            let sol = optimize_precoders(&r, x0, model.p_max, static_power, &cfg.lp, &cfg.fallback)?;
            updates = sol.updates;
            fallback_iterations = sol.fallback_iterations;
            let cand = r.recover(&sol.point);
            let cand_rate = lp_sum_rate(&cand, &real.h)?;
            let cand_power = lp_transmit_power(&cand);
            kept = !(ee(cand_rate, cand_power, model)? >= ee(rate, power, model)?);
            if !kept {
                p = cand;
                rate = cand_rate;
                power = cand_power;
            }
        }
        let mut phase = PhaseResult { rate, evaluations: 0, stalled: false };
        if let Some(stack) = stack.as_deref_mut() {
            let pc = p.clone();
            phase = phase_update(cfg, stack, real, rate, |gn, h| q_lp(gn, h, &pc), |h| lp_sum_rate(&pc, h))?;
            rate = phase.rate;
        }
        let next = ee(rate, power, model)?;
        records.push(AoRecord {
            iteration: it,
            ee: next,
            rate,
            tx_power: power,
            digital_updates: updates,
            fallback_iterations,
            phase_evaluations: phase.evaluations,
            stalled: phase.stalled,
            digital_kept: kept,
        });
        let go_on = stack.is_some() && improved(value, next, cfg.ao.tolerance);
        value = next;
        if !go_on {
            converged = true;
            break;
        }
    }
    let phases = stack.map(|s| s.phases().to_vec()).unwrap_or_default();
    Ok(AoRun { records, converged, digital: p, phases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_direct_channels, sample_user_channels, sample_user_positions, CorrelationCache, Geometry};
    use crate::config::AoSettings;
    use crate::objectives::isotropic_precoders;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            n_t: 4,
            users: 2,
            layers: 2,
            elements: 16,
            ao: AoSettings { max_iterations: 30, tolerance: 1e-6 },
            ..SystemConfig::default()
        }
    }

    fn setup(cfg: &SystemConfig, seed: u64) -> (SimStack, ChannelRealization) {
        let geo = Geometry::new(cfg);
        let corr = CorrelationCache::new(&geo);
        let mut stack = SimStack::new(&geo).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ph = (0..cfg.layers * cfg.elements)
            .map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        stack.set_phases(ph);
        let users = sample_user_positions(&mut rng, cfg.users);
        let real = sample_user_channels(&mut rng, cfg, &geo, &corr, &users, stack.response()).unwrap();
        (stack, real)
    }

    fn monotone(records: &[AoRecord]) -> bool {
        records.windows(2).all(|w| w[1].ee >= w[0].ee - 1e-12 * w[0].ee)
    }

    #[test]
    fn dpc_trajectory_is_monotone() {
        let cfg = small_cfg();
        let model = PowerModel::from_config(&cfg);
        let (mut stack, mut real) = setup(&cfg, 1);
        let run = run_ao_dpc(&cfg, &model, Some(&mut stack), &mut real).unwrap();
        assert!(run.records.len() > 2);
        assert!(monotone(&run.records));
        assert!(run.last().ee > run.records[0].ee);
        assert!(run.last().tx_power <= cfg.p_max * (1.0 + 1e-6));
    }

    #[test]
    fn lp_trajectory_is_monotone() {
        let cfg = small_cfg();
        let model = PowerModel::from_config(&cfg);
        let (mut stack, mut real) = setup(&cfg, 2);
        let run = run_ao_lp(&cfg, &model, Some(&mut stack), &mut real, &LpDigital::Optimize).unwrap();
        assert!(monotone(&run.records));
        assert!(run.last().ee > run.records[0].ee);
        assert!(run.last().tx_power <= cfg.p_max * (1.0 + 1e-6));
    }

    #[test]
    fn fixed_precoders_keep_full_power() {
        let cfg = small_cfg();
        let model = PowerModel::from_config(&cfg);
        let (mut stack, mut real) = setup(&cfg, 3);
        let p = isotropic_precoders(cfg.users, cfg.n_t, cfg.p_max);
        let run = run_ao_lp(&cfg, &model, Some(&mut stack), &mut real, &LpDigital::Fixed(p)).unwrap();
        assert!(monotone(&run.records));
        assert!(run.records.iter().all(|r| (r.tx_power - cfg.p_max).abs() < 1e-12 && r.digital_updates == 0));
    }

    #[test]
    fn without_sim_only_digital_part_runs() {
        let cfg = small_cfg();
        let geo = Geometry::new(&cfg);
        let corr = CorrelationCache::new(&geo);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let users = sample_user_positions(&mut rng, cfg.users);
        let mut real = sample_direct_channels(&mut rng, &cfg, &geo, &corr, &users).unwrap();
        let model = PowerModel::without_sim(&cfg);
        let run = run_ao_dpc(&cfg, &model, None, &mut real).unwrap();
        assert_eq!(run.records.len(), 2);
        assert_eq!(run.last().phase_evaluations, 0);
        let run = run_ao_lp(&cfg, &model, None, &mut real, &LpDigital::Optimize).unwrap();
        assert_eq!(run.records.len(), 2);
    }

    #[test]
    fn counters_match_executed_work() {
        let cfg = small_cfg();
        let model = PowerModel::from_config(&cfg);
        let (mut stack, mut real) = setup(&cfg, 5);
        let run = run_ao_dpc(&cfg, &model, Some(&mut stack), &mut real).unwrap();
        for r in &run.records[1..] {
            assert!(r.digital_updates >= 1);
            assert!(r.phase_evaluations >= 1);
        }
        let (iu, iphi) = run.average_counts(0.95);
        assert!(iu >= 1.0 && iphi >= 1.0);
    }
}
