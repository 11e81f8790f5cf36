//! JSON experiment description.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{db_to_linear, dbm_to_watts, AoSettings, DinkelbachSettings, FallbackSettings, SystemConfig};
use crate::error::{Error, Result};
use crate::phase::LineSearchParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Dpc,
    Lp,
    LinWoSim,
    LinWoPrec,
    LinWoPrecRedRf,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Dpc, Scheme::Lp, Scheme::LinWoSim, Scheme::LinWoPrec, Scheme::LinWoPrecRedRf];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dpc => "dpc",
            Scheme::Lp => "lp",
            Scheme::LinWoSim => "lin-wo-sim",
            Scheme::LinWoPrec => "lin-wo-prec",
            Scheme::LinWoPrecRedRf => "lin-wo-prec-red-rf",
        }
    }

    pub fn uses_sim(self) -> bool {
        self != Scheme::LinWoSim
    }
}

/// Flat experiment file. Powers are given in dBm, the noise power in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,

    pub wavelength_m: f64,
    pub n_t: usize,
    pub n_r: usize,
    pub users: usize,
    pub layers: usize,
    pub elements: usize,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    pub noise_power_db: f64,
    pub p_max_dbm: f64,
    pub p_c_dbm: f64,
    pub p_0_dbm: f64,
    pub p_s_dbm: f64,
    pub bs_midpoint_m: [f64; 3],

    pub eps_inner_dpc: f64,
    pub eps_outer_dpc: f64,
    pub eps_inner_lp: f64,
    pub eps_outer_lp: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub fallback_rate_tolerance: f64,
    pub fallback_max_iterations: usize,
    pub line_search_initial_step: f64,
    pub line_search_shrink: f64,
    pub line_search_delta: f64,
    pub ao_max_iterations: usize,
    pub ao_tolerance: f64,

    pub n_grid: Vec<usize>,
    pub layers_grid: Vec<usize>,
    pub total_elements: usize,
    pub k_grid: Vec<usize>,
    pub pmax_dbm_grid: Vec<f64>,
    pub bits_grid: Vec<u32>,
    /// Re-optimize the digital part at the quantized phases instead of keeping it.
    pub quantized_reoptimize: bool,
    /// Layer counts of the convergence experiment.
    pub convergence_layers: Vec<usize>,
    /// User counts of the complexity table.
    pub complexity_k_grid: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sys = SystemConfig::default();
        let d = DinkelbachSettings::default();
        let f = FallbackSettings::default();
        let ls = LineSearchParams::default();
        let ao = AoSettings::default();
        ExperimentConfig {
            schemes: Scheme::ALL.to_vec(),
            trials: 200,
            seed: 1,
            wavelength_m: sys.wavelength,
            n_t: sys.n_t,
            n_r: sys.n_r,
            users: sys.users,
            layers: sys.layers,
            elements: sys.elements,
            bandwidth_hz: sys.bandwidth_hz,
            path_loss_exponent: sys.path_loss_exponent,
            reference_distance_m: sys.reference_distance,
            noise_power_db: -110.0,
            p_max_dbm: crate::config::DEFAULT_P_MAX_DBM,
            p_c_dbm: 30.0,
            p_0_dbm: 40.0,
            p_s_dbm: 10.0,
            bs_midpoint_m: sys.bs_midpoint,
            eps_inner_dpc: d.eps_inner,
            eps_outer_dpc: d.eps_outer,
            eps_inner_lp: d.eps_inner,
            eps_outer_lp: d.eps_outer,
            max_inner: d.max_inner,
            max_outer: d.max_outer,
            fallback_rate_tolerance: f.rate_tolerance,
            fallback_max_iterations: f.max_iterations,
            line_search_initial_step: ls.initial_step,
            line_search_shrink: ls.shrink,
            line_search_delta: ls.sufficient_increase,
            ao_max_iterations: ao.max_iterations,
            ao_tolerance: ao.tolerance,
            n_grid: vec![25, 49, 100, 196],
            layers_grid: vec![1, 2, 4, 8],
            total_elements: 400,
            k_grid: vec![2, 4, 6, 8],
            pmax_dbm_grid: vec![20.0, 30.0, 40.0, 50.0],
            bits_grid: vec![1, 2, 3, 4],
            quantized_reoptimize: true,
            convergence_layers: vec![1, 2, 4, 8],
            complexity_k_grid: vec![4, 8, 12],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required");
        }
        if self.n_grid.is_empty()
            || self.layers_grid.is_empty()
            || self.k_grid.is_empty()
            || self.pmax_dbm_grid.is_empty()
            || self.bits_grid.is_empty()
            || self.convergence_layers.is_empty()
            || self.complexity_k_grid.is_empty()
        {
            return bad("sweep grids must be non-empty");
        }
        if self.bits_grid.contains(&0) {
            return bad("quantization needs at least one bit");
        }
        if let Some(l) = self.layers_grid.iter().find(|&&l| l == 0 || !self.total_elements.is_multiple_of(l)) {
            return bad(&format!("{} layers do not divide {} elements", l, self.total_elements));
        }
        self.system().validate()
    }

    /// Linear-unit system parameters at the base operating point.
    pub fn system(&self) -> SystemConfig {
        let dink = |eps_inner, eps_outer| DinkelbachSettings {
            eps_inner,
            eps_outer,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
        };
        SystemConfig {
            wavelength: self.wavelength_m,
            n_t: self.n_t,
            n_r: self.n_r,
            users: self.users,
            layers: self.layers,
            elements: self.elements,
            bandwidth_hz: self.bandwidth_hz,
            path_loss_exponent: self.path_loss_exponent,
            reference_distance: self.reference_distance_m,
            noise_power: db_to_linear(self.noise_power_db),
            p_max: dbm_to_watts(self.p_max_dbm),
            p_c: dbm_to_watts(self.p_c_dbm),
            p_0: dbm_to_watts(self.p_0_dbm),
            p_s: dbm_to_watts(self.p_s_dbm),
            bs_midpoint: self.bs_midpoint_m,
            dpc: dink(self.eps_inner_dpc, self.eps_outer_dpc),
            lp: dink(self.eps_inner_lp, self.eps_outer_lp),
            fallback: FallbackSettings {
                rate_tolerance: self.fallback_rate_tolerance,
                max_iterations: self.fallback_max_iterations,
                ..FallbackSettings::default()
            },
            line_search: LineSearchParams {
                initial_step: self.line_search_initial_step,
                shrink: self.line_search_shrink,
                sufficient_increase: self.line_search_delta,
                ..LineSearchParams::default()
            },
            ao: AoSettings { max_iterations: self.ao_max_iterations, tolerance: self.ao_tolerance },
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"trials": 3, "bogus": 1}"#);
        assert!(err.is_err());
        let ok: ExperimentConfig = serde_json::from_str(r#"{"trials": 3, "schemes": ["dpc", "lin-wo-prec-red-rf"]}"#).unwrap();
        assert_eq!(ok.trials, 3);
        assert_eq!(ok.schemes, vec![Scheme::Dpc, Scheme::LinWoPrecRedRf]);
    }

    #[test]
    fn invalid_values_rejected() {
        let c = ExperimentConfig { trials: 0, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { n_grid: vec![], ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { eps_inner_lp: 0.0, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { layers_grid: vec![3], ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn system_conversion() {
        let s = ExperimentConfig::default().system();
        assert!((s.noise_power - 1e-11).abs() < 1e-24);
        assert!((s.p_0 - 10.0).abs() < 1e-12);
        assert_eq!(s.line_search.initial_step, 1000.0);
    }
}
