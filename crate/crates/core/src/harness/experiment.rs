//! Monte Carlo orchestration, sweeps and result files.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ao::{run_ao_dpc, run_ao_lp, AoRecord, AoRun, LpDigital};
use super::complexity::{ComplexityRow, Dims};
use super::config::{ExperimentConfig, Scheme};
use crate::channel::{
    sample_direct_channels, sample_user_channels, sample_user_positions, ChannelRealization, CorrelationCache,
    Geometry, SimStack,
};
use crate::config::{dbm_to_watts, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::objectives::{ee, isotropic_precoders, lp_sum_rate, lp_transmit_power, mac_sum_rate, CovarianceSet, PowerModel};
use crate::phase::quantize_phases;

const STREAM_USERS: u64 = 0;
const STREAM_SIM_FADING: u64 = 1;
const STREAM_DIRECT_FADING: u64 = 2;
const STREAM_PHASES: u64 = 3;
const STREAMS_PER_TRIAL: u64 = 8;

/// Independent generator for one purpose within one trial.
pub fn trial_rng(seed: u64, trial: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * STREAMS_PER_TRIAL + stream);
    rng
}

/// Geometry-dependent data shared by all trials of one operating point.
pub struct PointSetup {
    pub cfg: SystemConfig,
    pub geometry: Geometry,
    pub corr: CorrelationCache,
    pub stack: Option<SimStack>,
}

impl PointSetup {
    pub fn new(cfg: SystemConfig) -> Result<PointSetup> {
        cfg.validate()?;
        let geometry = Geometry::new(&cfg);
        let corr = CorrelationCache::new(&geometry);
        let stack = if cfg.layers > 0 { Some(SimStack::new(&geometry)?) } else { None };
        Ok(PointSetup { cfg, geometry, corr, stack })
    }
}

#[derive(Debug, Clone)]
pub enum Digital {
    Dpc(CovarianceSet),
    Lp(Vec<CMat>),
}

/// Everything a scheme run needs for one trial.
pub struct TrialState {
    pub scheme: Scheme,
    pub model: PowerModel,
    pub stack: Option<SimStack>,
    pub real: ChannelRealization,
    pub lp_digital: LpDigital,
}

pub fn prepare_trial(setup: &PointSetup, scheme: Scheme, seed: u64, trial: usize) -> Result<TrialState> {
    let cfg = &setup.cfg;
    let users = sample_user_positions(&mut trial_rng(seed, trial, STREAM_USERS), cfg.users);
    if !scheme.uses_sim() {
        let mut rng = trial_rng(seed, trial, STREAM_DIRECT_FADING);
        let real = sample_direct_channels(&mut rng, cfg, &setup.geometry, &setup.corr, &users)?;
        return Ok(TrialState {
            scheme,
            model: PowerModel::without_sim(cfg),
            stack: None,
            real,
            lp_digital: LpDigital::Optimize,
        });
    }
    let mut stack = setup
        .stack
        .clone()
        .ok_or_else(|| Error::InvalidConfig(format!("scheme {} needs at least one SIM layer", scheme.name())))?;
    let mut prng = trial_rng(seed, trial, STREAM_PHASES);
    let phases: Vec<C64> = (0..stack.phases().len()).map(|_| C64::from_polar(1.0, prng.random::<f64>() * TAU)).collect();
    stack.set_phases(phases);
    let mut rng = trial_rng(seed, trial, STREAM_SIM_FADING);
    let real = sample_user_channels(&mut rng, cfg, &setup.geometry, &setup.corr, &users, stack.response())?;
    let mut model = PowerModel::from_config(cfg);
    let lp_digital = match scheme {
        Scheme::LinWoPrec => LpDigital::Fixed(isotropic_precoders(cfg.users, cfg.n_t, cfg.p_max)),
        Scheme::LinWoPrecRedRf => {
            let chains = cfg.users * cfg.n_r;
            if chains > cfg.n_t {
                return Err(Error::InvalidConfig(format!(
                    "reduced-RF benchmark needs K*N_r = {chains} <= N_t = {}",
                    cfg.n_t
                )));
            }
            model = model.with_rf_chains(chains);
            LpDigital::Fixed(selection_precoders(cfg.users, cfg.n_r, cfg.n_t, cfg.p_max))
        }
        _ => LpDigital::Optimize,
    };
    Ok(TrialState { scheme, model, stack: Some(stack), real, lp_digital })
}

/// One stream per active antenna: user `k` drives antennas `k N_r .. (k+1) N_r`
/// at power `P_max / (K N_r)` each.
pub fn selection_precoders(users: usize, n_r: usize, n_t: usize, p_max: f64) -> Vec<CMat> {
    let a = (p_max / (users * n_r) as f64).sqrt();
    (0..users)
        .map(|k| {
            let mut p = CMat::zeros(n_t, n_r);
            for i in 0..n_r {
                p[(k * n_r + i, i)] = C64::new(a, 0.0);
            }
            p
        })
        .collect()
}

pub fn run_scheme(cfg: &SystemConfig, state: &mut TrialState) -> Result<AoRun<Digital>> {
    let stack = state.stack.as_mut();
    let run = match state.scheme {
        Scheme::Dpc => {
            let r = run_ao_dpc(cfg, &state.model, stack, &mut state.real)?;
            AoRun { records: r.records, converged: r.converged, digital: Digital::Dpc(r.digital), phases: r.phases }
        }
        _ => {
            let r = run_ao_lp(cfg, &state.model, stack, &mut state.real, &state.lp_digital)?;
            AoRun { records: r.records, converged: r.converged, digital: Digital::Lp(r.digital), phases: r.phases }
        }
    };
    Ok(run)
}

/// EE record after snapping the phases to `bits`. The digital part of `run`
/// is kept unless `reoptimize` is set, in which case it is re-optimized for
/// the quantized SIM.
pub fn quantized_record(
    cfg: &SystemConfig,
    state: &TrialState,
    run: &AoRun<Digital>,
    bits: u32,
    reoptimize: bool,
) -> Result<AoRecord> {
    let mut stack = state.stack.clone().ok_or_else(|| Error::InvalidConfig("quantization needs a SIM".into()))?;
    stack.set_phases(quantize_phases(&run.phases, bits)?);
    let mut real = state.real.clone();
    real.refresh(stack.response());
    if reoptimize {
        return Ok(match state.scheme {
            Scheme::Dpc => run_ao_dpc(cfg, &state.model, None, &mut real)?.last().clone(),
            _ => run_ao_lp(cfg, &state.model, None, &mut real, &state.lp_digital)?.last().clone(),
        });
    }
    let (rate, tx_power) = match &run.digital {
        Digital::Dpc(s) => (mac_sum_rate(s, &real.h)?, s.transmit_power()),
        Digital::Lp(p) => (lp_sum_rate(p, &real.h)?, lp_transmit_power(p)),
    };
    Ok(AoRecord {
        iteration: 0,
        ee: ee(rate, tx_power, &state.model)?,
        rate,
        tx_power,
        digital_updates: 0,
        fallback_iterations: 0,
        phase_evaluations: 0,
        stalled: false,
        digital_kept: true,
    })
}

/// One CSV row.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: String,
    pub trial: String,
    pub ee_bits_per_joule: f64,
    pub sumrate_bps: f64,
    pub tx_power_w: f64,
    pub iters_outer: f64,
    pub iters_inner: f64,
    pub counters: String,
}

fn bits_per_second(cfg: &SystemConfig, rate_nats: f64) -> f64 {
    cfg.bandwidth_hz * rate_nats / std::f64::consts::LN_2
}

fn row_from_run(cfg: &SystemConfig, scheme: Scheme, var: &str, value: &str, trial: usize, run: &AoRun<Digital>) -> ResultRow {
    let last = run.last();
    let stalls = run.records.iter().filter(|r| r.stalled).count();
    let kept = run.records.iter().filter(|r| r.digital_kept).count();
    ResultRow {
        scheme: scheme.name().into(),
        sweep_var: var.into(),
        sweep_value: value.into(),
        trial: trial.to_string(),
        ee_bits_per_joule: last.ee,
        sumrate_bps: bits_per_second(cfg, last.rate),
        tx_power_w: last.tx_power,
        iters_outer: (run.records.len() - 1) as f64,
        iters_inner: run.total_digital_updates() as f64,
        counters: format!(
            "digital_updates={};fallback_iterations={};phase_evaluations={};stalls={};digital_kept={};converged={}",
            run.total_digital_updates(),
            run.total_fallback_iterations(),
            run.total_phase_evaluations(),
            stalls,
            kept,
            run.converged
        ),
    }
}

/// Means over trials, grouped by scheme and sweep point in first-seen order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.scheme.clone(), r.sweep_var.clone(), r.sweep_value.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let mean = |f: fn(&ResultRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            ResultRow {
                scheme: key.0,
                sweep_var: key.1,
                sweep_value: key.2,
                trial: "mean".into(),
                ee_bits_per_joule: mean(|r| r.ee_bits_per_joule),
                sumrate_bps: mean(|r| r.sumrate_bps),
                tx_power_w: mean(|r| r.tx_power_w),
                iters_outer: mean(|r| r.iters_outer),
                iters_inner: mean(|r| r.iters_inner),
                counters: format!("trials={}", g.len()),
            }
        })
        .collect()
}

/// A sweep over one parameter; each point maps to a system configuration.
pub struct Sweep {
    pub var: &'static str,
    pub points: Vec<(String, SystemConfig)>,
}

impl Sweep {
    pub fn n(exp: &ExperimentConfig) -> Sweep {
        let base = exp.system();
        Sweep {
            var: "elements",
            points: exp.n_grid.iter().map(|&n| (n.to_string(), SystemConfig { elements: n, ..base.clone() })).collect(),
        }
    }

    pub fn layers(exp: &ExperimentConfig) -> Sweep {
        let base = exp.system();
        Sweep {
            var: "layers",
            points: exp
                .layers_grid
                .iter()
                .map(|&l| (l.to_string(), SystemConfig { layers: l, elements: exp.total_elements / l, ..base.clone() }))
                .collect(),
        }
    }

    pub fn users(exp: &ExperimentConfig) -> Sweep {
        let base = exp.system();
        Sweep {
            var: "users",
            points: exp.k_grid.iter().map(|&k| (k.to_string(), SystemConfig { users: k, ..base.clone() })).collect(),
        }
    }

    pub fn p_max(exp: &ExperimentConfig) -> Sweep {
        let base = exp.system();
        Sweep {
            var: "p_max_dbm",
            points: exp
                .pmax_dbm_grid
                .iter()
                .map(|&p| (p.to_string(), SystemConfig { p_max: dbm_to_watts(p), ..base.clone() }))
                .collect(),
        }
    }
}

fn with_trial<T>(trial: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Trial { trial, source: Box::new(e) })
}

/// Runs every scheme at every sweep point; rows come back ordered by point,
/// scheme and trial regardless of scheduling.
pub fn run_sweep(sweep: &Sweep, schemes: &[Scheme], trials: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let setups = sweep.points.iter().map(|(_, c)| PointSetup::new(c.clone())).collect::<Result<Vec<_>>>()?;
    let per_trial: Vec<Vec<ResultRow>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rows = Vec::new();
            for ((value, _), setup) in sweep.points.iter().zip(&setups) {
                for &scheme in schemes {
                    let mut state = with_trial(trial, prepare_trial(setup, scheme, seed, trial))?;
                    let run = with_trial(trial, run_scheme(&setup.cfg, &mut state))?;
                    rows.push(row_from_run(&setup.cfg, scheme, sweep.var, value, trial, &run));
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reorder(per_trial))
}

/// Interleaves per-trial row lists into (point, scheme, trial) order.
fn reorder(per_trial: Vec<Vec<ResultRow>>) -> Vec<ResultRow> {
    let width = per_trial.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(width * per_trial.len());
    for i in 0..width {
        for rows in &per_trial {
            out.push(rows[i].clone());
        }
    }
    out
}

/// Continuous-phase optimum and its quantized variants for every SIM scheme.
pub fn run_quantization(exp: &ExperimentConfig, schemes: &[Scheme], trials: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let setup = PointSetup::new(exp.system())?;
    let cfg = &setup.cfg;
    let schemes: Vec<Scheme> = schemes.iter().copied().filter(|s| s.uses_sim()).collect();
    let per_trial: Vec<Vec<ResultRow>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rows = Vec::new();
            for &scheme in &schemes {
                let mut state = with_trial(trial, prepare_trial(&setup, scheme, seed, trial))?;
                let run = with_trial(trial, run_scheme(cfg, &mut state))?;
                rows.push(row_from_run(cfg, scheme, "bits", "continuous", trial, &run));
                for &bits in &exp.bits_grid {
                    let rec = with_trial(trial, quantized_record(cfg, &state, &run, bits, exp.quantized_reoptimize))?;
                    rows.push(ResultRow {
                        scheme: scheme.name().into(),
                        sweep_var: "bits".into(),
                        sweep_value: bits.to_string(),
                        trial: trial.to_string(),
                        ee_bits_per_joule: rec.ee,
                        sumrate_bps: bits_per_second(cfg, rec.rate),
                        tx_power_w: rec.tx_power,
                        iters_outer: 1.0,
                        iters_inner: rec.digital_updates as f64,
                        counters: format!(
                            "digital_updates={};fallback_iterations={}",
                            rec.digital_updates, rec.fallback_iterations
                        ),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reorder(per_trial))
}

/// Per-iteration EE of one trajectory.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub layers: usize,
    pub trial: String,
    pub iteration: usize,
    pub ee_bits_per_joule: f64,
    pub sumrate_bps: f64,
    pub tx_power_w: f64,
}

/// Trajectories of the proposed schemes for one layer count, followed by the
/// trial mean (shorter trajectories held at their final value).
pub fn run_convergence(exp: &ExperimentConfig, layers: usize, trials: usize, seed: u64) -> Result<Vec<ConvergenceRow>> {
    let cfg = SystemConfig { layers, ..exp.system() };
    let setup = PointSetup::new(cfg)?;
    let schemes: Vec<Scheme> = exp.schemes.iter().copied().filter(|s| matches!(s, Scheme::Dpc | Scheme::Lp)).collect();
    let runs: Vec<Vec<Vec<AoRecord>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            schemes
                .iter()
                .map(|&scheme| {
                    let mut state = with_trial(trial, prepare_trial(&setup, scheme, seed, trial))?;
                    Ok(with_trial(trial, run_scheme(&setup.cfg, &mut state))?.records)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (si, scheme) in schemes.iter().enumerate() {
        let row = |trial: String, r: &AoRecord| ConvergenceRow {
            scheme: scheme.name().into(),
            layers,
            trial,
            iteration: r.iteration,
            ee_bits_per_joule: r.ee,
            sumrate_bps: bits_per_second(&setup.cfg, r.rate),
            tx_power_w: r.tx_power,
        };
        for (trial, per) in runs.iter().enumerate() {
            rows.extend(per[si].iter().map(|r| row(trial.to_string(), r)));
        }
        let len = runs.iter().map(|per| per[si].len()).max().unwrap_or(0);
        for it in 0..len {
            let at = |recs: &Vec<AoRecord>| recs[it.min(recs.len() - 1)].clone();
            let n = runs.len() as f64;
            let pick: Vec<AoRecord> = runs.iter().map(|per| at(&per[si])).collect();
            let mean = AoRecord {
                iteration: it,
                ee: pick.iter().map(|r| r.ee).sum::<f64>() / n,
                rate: pick.iter().map(|r| r.rate).sum::<f64>() / n,
                tx_power: pick.iter().map(|r| r.tx_power).sum::<f64>() / n,
                ..pick[0].clone()
            };
            rows.push(row("mean".into(), &mean));
        }
    }
    Ok(rows)
}

/// Iteration counts averaged up to 95% of the final EE, then over trials.
pub fn run_complexity(exp: &ExperimentConfig, trials: usize, seed: u64) -> Result<Vec<ComplexityRow>> {
    exp.complexity_k_grid
        .iter()
        .map(|&k| {
            let setup = PointSetup::new(SystemConfig { users: k, ..exp.system() })?;
            let counts: Vec<[f64; 4]> = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut out = [0.0; 4];
                    for (i, scheme) in [Scheme::Dpc, Scheme::Lp].into_iter().enumerate() {
                        let mut state = with_trial(trial, prepare_trial(&setup, scheme, seed, trial))?;
                        let run = with_trial(trial, run_scheme(&setup.cfg, &mut state))?;
                        let (iu, iphi) = run.average_counts(0.95);
                        out[2 * i] = iu;
                        out[2 * i + 1] = iphi;
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = counts.len() as f64;
            let avg = |i: usize| counts.iter().map(|c| c[i]).sum::<f64>() / n;
            let c = &setup.cfg;
            let dims = Dims {
                users: k as u64,
                n_t: c.n_t as u64,
                n_r: c.n_r as u64,
                elements: c.elements as u64,
                layers: c.layers as u64,
            };
            Ok(ComplexityRow::new(&dims, avg(0), avg(1), avg(2), avg(3)))
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub trials: usize,
    pub config_sha256: String,
    pub git_revision: String,
    pub notes: Vec<String>,
    pub config: &'a ExperimentConfig,
}

pub fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_metadata(dir: &Path, command: &str, exp: &ExperimentConfig, notes: Vec<String>) -> Result<()> {
    let meta = Metadata {
        command,
        seed: exp.seed,
        trials: exp.trials,
        config_sha256: exp.hash(),
        git_revision: git_revision(),
        notes,
        config: exp,
    };
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Writes `results.csv` and `aggregate.csv` for a set of rows.
pub fn write_results(dir: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv(&dir.join("results.csv"), rows)?;
    write_csv(&dir.join("aggregate.csv"), &aggregate(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_t: 4,
            users: 2,
            layers: 1,
            elements: 9,
            trials: 2,
            ao_max_iterations: 5,
            n_grid: vec![4, 9],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = trial_rng(1, 0, STREAM_USERS).random();
        let b: u64 = trial_rng(1, 0, STREAM_PHASES).random();
        let c: u64 = trial_rng(1, 1, STREAM_USERS).random();
        let d: u64 = trial_rng(1, 0, STREAM_USERS).random();
        assert!(a != b && a != c);
        assert_eq!(a, d);
    }

    #[test]
    fn selection_precoders_hit_budget() {
        let p = selection_precoders(4, 2, 16, 2.0);
        assert!((crate::objectives::lp_transmit_power(&p) - 2.0).abs() < 1e-12);
        assert_eq!(p[3][(7, 1)].re, (2.0f64 / 8.0).sqrt());
    }

    #[test]
    fn sweep_rows_and_aggregate() {
        let exp = tiny();
        let rows = run_sweep(&Sweep::n(&exp), &Scheme::ALL, 2, 7).unwrap();
        assert_eq!(rows.len(), 2 * 5 * 2);
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 10);
        let lp9: Vec<_> = rows.iter().filter(|r| r.scheme == "lp" && r.sweep_value == "9").collect();
        let mean = lp9.iter().map(|r| r.ee_bits_per_joule).sum::<f64>() / 2.0;
        let a = agg.iter().find(|r| r.scheme == "lp" && r.sweep_value == "9").unwrap();
        assert!((a.ee_bits_per_joule - mean).abs() <= 1e-12 * mean);
        // the no-SIM benchmark does not depend on N
        let wo: Vec<_> = agg.iter().filter(|r| r.scheme == "lin-wo-sim").collect();
        assert_eq!(wo[0].ee_bits_per_joule, wo[1].ee_bits_per_joule);
    }

    #[test]
    fn reduced_rf_rejects_too_many_streams() {
        let exp = ExperimentConfig { users: 3, ..tiny() };
        let setup = PointSetup::new(exp.system()).unwrap();
        assert!(prepare_trial(&setup, Scheme::LinWoPrecRedRf, 1, 0).is_err());
    }

    #[test]
    fn evaluation_only_quantization_never_beats_continuous() {
        let exp = ExperimentConfig { layers: 2, ao_max_iterations: 20, ..tiny() };
        let setup = PointSetup::new(exp.system()).unwrap();
        for trial in 0..10 {
            for scheme in [Scheme::Dpc, Scheme::Lp] {
                let mut state = prepare_trial(&setup, scheme, 11, trial).unwrap();
                let run = run_scheme(&setup.cfg, &mut state).unwrap();
                let cont = run.last().ee;
                for bits in 1..=4 {
                    let q = quantized_record(&setup.cfg, &state, &run, bits, false).unwrap();
                    assert!(q.ee <= cont * (1.0 + 1e-12), "{} trial {trial} bits {bits}", scheme.name());
                    assert!((q.tx_power - run.last().tx_power).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fine_quantization_approaches_continuous() {
        let setup = PointSetup::new(tiny().system()).unwrap();
        let mut state = prepare_trial(&setup, Scheme::Lp, 5, 0).unwrap();
        let run = run_scheme(&setup.cfg, &mut state).unwrap();
        let q = quantized_record(&setup.cfg, &state, &run, 20, false).unwrap();
        assert!((q.ee - run.last().ee).abs() < 1e-6 * run.last().ee);
    }
}
