//! System parameters in linear SI units.
//!
//! The JSON experiment file speaks dBm/dB; it is converted into a
//! [`SystemConfig`] exactly once, in `harness::config`.

use crate::error::{Error, Result};
use crate::phase::LineSearchParams;

/// Transmit power budget used when none is configured.
pub const DEFAULT_P_MAX_DBM: f64 = 40.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Stopping rules of a nested Dinkelbach/SCA loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachSettings {
    /// Inner (SCA) tolerance on the ratio objective.
    pub eps_inner: f64,
    /// Outer (Dinkelbach) tolerance on the ratio parameter.
    pub eps_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl Default for DinkelbachSettings {
    fn default() -> Self {
        DinkelbachSettings {
            eps_inner: 1e-6,
            eps_outer: 1e-6,
            max_inner: 500,
            max_outer: 50,
        }
    }
}

/// Settings of the power-constrained sum-rate fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackSettings {
    /// Stop re-expanding once the relative sum-rate gain drops below this.
    pub rate_tolerance: f64,
    pub max_iterations: usize,
    /// Relative accuracy of the power match found by bisection.
    pub power_tolerance: f64,
}

impl Default for FallbackSettings {
    fn default() -> Self {
        FallbackSettings {
            rate_tolerance: 1e-10,
            max_iterations: 2000,
            power_tolerance: 1e-12,
        }
    }
}

/// Alternating-optimization stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoSettings {
    pub max_iterations: usize,
    /// Relative EE improvement below which the AO loop stops.
    pub tolerance: f64,
}

impl Default for AoSettings {
    fn default() -> Self {
        AoSettings {
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub n_t: usize,
    pub n_r: usize,
    pub users: usize,
    pub layers: usize,
    /// Meta-elements per layer.
    pub elements: usize,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    pub reference_distance: f64,
    /// Noise variance in watts.
    pub noise_power: f64,
    pub p_max: f64,
    /// Circuit power per active RF chain, watts.
    pub p_c: f64,
    /// Static base-station power, watts.
    pub p_0: f64,
    /// Power per meta-element, watts.
    pub p_s: f64,
    /// Midpoint of the BS antenna array; layer `l` sits at `z = l·λ/2` above it.
    pub bs_midpoint: [f64; 3],
    pub dpc: DinkelbachSettings,
    pub lp: DinkelbachSettings,
    pub fallback: FallbackSettings,
    pub line_search: LineSearchParams,
    pub ao: AoSettings,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            wavelength: 0.05,
            n_t: 16,
            n_r: 2,
            users: 4,
            layers: 4,
            elements: 100,
            bandwidth_hz: 100e3,
            path_loss_exponent: 3.5,
            reference_distance: 1.0,
            noise_power: db_to_linear(-110.0),
            p_max: dbm_to_watts(DEFAULT_P_MAX_DBM),
            p_c: dbm_to_watts(30.0),
            p_0: dbm_to_watts(40.0),
            p_s: dbm_to_watts(10.0),
            bs_midpoint: [30.0, 0.0, 0.0],
            dpc: DinkelbachSettings::default(),
            lp: DinkelbachSettings::default(),
            fallback: FallbackSettings::default(),
            line_search: LineSearchParams::default(),
            ao: AoSettings::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_t == 0 || self.n_r == 0 || self.users == 0 {
            return bad("antenna and user counts must be positive");
        }
        if self.layers > 0 && self.elements == 0 {
            return bad("a SIM needs at least one element per layer");
        }
        if !(self.wavelength > 0.0 && self.reference_distance > 0.0 && self.noise_power > 0.0) {
            return bad("wavelength, reference distance and noise power must be positive");
        }
        if !(self.p_max > 0.0) || self.p_c < 0.0 || self.p_0 < 0.0 || self.p_s < 0.0 {
            return bad("P_max must be positive and consumption constants non-negative");
        }
        for d in [&self.dpc, &self.lp] {
            if !(d.eps_inner > 0.0 && d.eps_outer > 0.0) || d.max_inner == 0 || d.max_outer == 0 {
                return bad("Dinkelbach tolerances and caps must be positive");
            }
        }
        let ls = &self.line_search;
        if !(ls.initial_step > 0.0 && ls.shrink > 0.0 && ls.shrink < 1.0 && ls.sufficient_increase > 0.0) {
            return bad("line search needs initial step > 0, shrink in (0,1), delta > 0");
        }
        if !(self.ao.tolerance > 0.0) || self.ao.max_iterations == 0 {
            return bad("AO tolerance and iteration cap must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((db_to_linear(-110.0) - 1e-11).abs() < 1e-24);
    }

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
        let mut c = SystemConfig::default();
        c.line_search.shrink = 1.0;
        assert!(c.validate().is_err());
    }
}
