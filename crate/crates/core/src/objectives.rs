//! Rate, power and energy-efficiency evaluators.
//!
//! Rates are in nats internally; conversion to bits happens only in [`ee`].

use std::f64::consts::LN_2;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{eye, gram, logdet_hpd, min_eigenvalue, norm_sqr, CMat};

/// Power consumption model of one transmitter configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub p_max: f64,
    pub p_c: f64,
    pub p_0: f64,
    pub p_s: f64,
    /// Active RF chains.
    pub n_t_active: usize,
    pub layers: usize,
    pub elements: usize,
    pub bandwidth_hz: f64,
}

impl PowerModel {
    /// All `N_t` chains active and the configured SIM powered.
    pub fn from_config(cfg: &SystemConfig) -> PowerModel {
        PowerModel {
            p_max: cfg.p_max,
            p_c: cfg.p_c,
            p_0: cfg.p_0,
            p_s: cfg.p_s,
            n_t_active: cfg.n_t,
            layers: cfg.layers,
            elements: cfg.elements,
            bandwidth_hz: cfg.bandwidth_hz,
        }
    }

    /// No SIM: the meta-element term drops out.
    pub fn without_sim(cfg: &SystemConfig) -> PowerModel {
        PowerModel { layers: 0, ..Self::from_config(cfg) }
    }

    pub fn with_rf_chains(self, chains: usize) -> PowerModel {
        PowerModel { n_t_active: chains, ..self }
    }

    /// Everything except the radiated power.
    pub fn static_power(&self) -> f64 {
        self.n_t_active as f64 * self.p_c + self.p_0 + (self.layers * self.elements) as f64 * self.p_s
    }
}

pub fn total_power(transmit_power: f64, model: &PowerModel) -> Result<f64> {
    if !(transmit_power >= 0.0) {
        return Err(Error::Domain(format!("transmit power must be >= 0, got {transmit_power}")));
    }
    Ok(transmit_power + model.static_power())
}

/// Bits per joule from a sum-rate in nats per channel use.
pub fn ee(rate_nats: f64, transmit_power: f64, model: &PowerModel) -> Result<f64> {
    Ok(model.bandwidth_hz * rate_nats / LN_2 / total_power(transmit_power, model)?)
}

/// Dual-MAC input covariances, one `N_r × N_r` matrix per user.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub s: Vec<CMat>,
}

impl CovarianceSet {
    pub fn uniform(users: usize, n_r: usize, p_max: f64) -> CovarianceSet {
        let v = p_max / (users * n_r) as f64;
        CovarianceSet { s: vec![eye(n_r).scale(v); users] }
    }

    pub fn transmit_power(&self) -> f64 {
        self.s.iter().map(|s| s.trace().re).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.s.iter().enumerate() {
            let herm = (s - s.adjoint()).norm();
            if herm > 1e-10 * s.norm().max(1.0) {
                return Err(Error::Domain(format!("S_{k} is not Hermitian (deviation {herm:e})")));
            }
            let lo = min_eigenvalue(s);
            if lo < -1e-10 * s.norm().max(1.0) {
                return Err(Error::Domain(format!("S_{k} has negative eigenvalue {lo:e}")));
            }
        }
        Ok(())
    }
}

/// `ln|I + Σ_k H_k^H S_k H_k|`.
pub fn mac_sum_rate(s: &CovarianceSet, h: &[CMat]) -> Result<f64> {
    let nt = h[0].ncols();
    let mut d = eye(nt);
    for (hk, sk) in h.iter().zip(&s.s) {
        d += hk.adjoint() * sk * hk;
    }
    logdet_hpd(&d)
}

/// Total covariance `Σ_j P_j P_j^H` and the per-user interference
/// covariances `Σ_{j≠k} P_j P_j^H`.
pub fn lp_covariances(precoders: &[CMat]) -> (CMat, Vec<CMat>) {
    let q: Vec<CMat> = precoders.iter().map(|p| p * p.adjoint()).collect();
    let n = precoders[0].nrows();
    let total = q.iter().fold(CMat::zeros(n, n), |acc, qk| acc + qk);
    let others = q.iter().map(|qk| &total - qk).collect();
    (total, others)
}

fn lp_rate_from(hk: &CMat, total: &CMat, others: &CMat) -> Result<f64> {
    let nr = hk.nrows();
    let f1 = eye(nr) + hk * total * hk.adjoint();
    let f2 = eye(nr) + hk * others * hk.adjoint();
    Ok(logdet_hpd(&f1)? - logdet_hpd(&f2)?)
}

/// Rate of user `k` under linear precoding with interference as noise,
/// `ln|F_{1,k}| − ln|F_{2,k}|`.
pub fn lp_user_rate(precoders: &[CMat], h: &[CMat], k: usize) -> Result<f64> {
    let (total, others) = lp_covariances(precoders);
    lp_rate_from(&h[k], &total, &others[k])
}

pub fn lp_sum_rate(precoders: &[CMat], h: &[CMat]) -> Result<f64> {
    let (total, others) = lp_covariances(precoders);
    h.iter().zip(&others).map(|(hk, ok)| lp_rate_from(hk, &total, ok)).sum()
}

pub fn lp_transmit_power(precoders: &[CMat]) -> f64 {
    precoders.iter().map(norm_sqr).sum()
}

pub fn ee_dpc(s: &CovarianceSet, h: &[CMat], model: &PowerModel) -> Result<f64> {
    ee(mac_sum_rate(s, h)?, s.transmit_power(), model)
}

pub fn ee_lp(precoders: &[CMat], h: &[CMat], model: &PowerModel) -> Result<f64> {
    ee(lp_sum_rate(precoders, h)?, lp_transmit_power(precoders), model)
}

/// Precoders of the no-digital-precoding benchmark: `P_k P_k^H = (P_max/(K N_t)) I`.
pub fn isotropic_precoders(users: usize, n_t: usize, p_max: f64) -> Vec<CMat> {
    let a = (p_max / (users * n_t) as f64).sqrt();
    vec![eye(n_t).scale(a); users]
}

/// Reduced-dimension description of the stacked channel `H` (`K N_r × N_t`).
#[derive(Debug, Clone)]
pub struct ReducedChannel {
    pub h_stack: CMat,
    /// `H H^H`.
    pub hbar: CMat,
    /// Row blocks `H_k H^H`.
    pub hbar_k: Vec<CMat>,
    pub n_r: usize,
}

pub fn reduce_problem(h: &[CMat]) -> ReducedChannel {
    let nr = h[0].nrows();
    let nt = h[0].ncols();
    let mut h_stack = CMat::zeros(nr * h.len(), nt);
    for (k, hk) in h.iter().enumerate() {
        h_stack.view_mut((k * nr, 0), (nr, nt)).copy_from(hk);
    }
    let hh = h_stack.adjoint();
    let hbar = &h_stack * &hh;
    let hbar_k = h.iter().map(|hk| hk * &hh).collect();
    ReducedChannel { h_stack, hbar, hbar_k, n_r: nr }
}

impl ReducedChannel {
    pub fn users(&self) -> usize {
        self.hbar_k.len()
    }

    pub fn n_t(&self) -> usize {
        self.h_stack.ncols()
    }

    pub fn h(&self, k: usize) -> CMat {
        self.h_stack.rows(k * self.n_r, self.n_r).into_owned()
    }

    /// `P_k = H^H X_k`.
    pub fn recover(&self, x: &[CMat]) -> Vec<CMat> {
        let hh = self.h_stack.adjoint();
        x.iter().map(|xk| &hh * xk).collect()
    }

    /// `Σ_k tr(H̄ X_k X_k^H)`.
    pub fn transmit_power(&self, x: &[CMat]) -> f64 {
        x.iter().map(|xk| (xk.adjoint() * &self.hbar * xk).trace().re).sum()
    }

    pub fn user_rate(&self, x: &[CMat], k: usize) -> Result<f64> {
        let hk = &self.hbar_k[k];
        let nr = self.n_r;
        let mut others = eye(nr);
        let mut signal = CMat::zeros(nr, nr);
        for (j, xj) in x.iter().enumerate() {
            let c = gram(&(hk * xj).adjoint());
            if j == k {
                signal = c;
            } else {
                others += c;
            }
        }
        Ok(logdet_hpd(&(&others + signal))? - logdet_hpd(&others)?)
    }

    pub fn sum_rate(&self, x: &[CMat]) -> Result<f64> {
        (0..self.users()).map(|k| self.user_rate(x, k)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::config::dbm_to_watts;
    use crate::linalg::{inv_hpd, C64};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> PowerModel {
        PowerModel {
            p_max: 1.0,
            p_c: dbm_to_watts(30.0),
            p_0: dbm_to_watts(40.0),
            p_s: dbm_to_watts(10.0),
            n_t_active: 16,
            layers: 4,
            elements: 100,
            bandwidth_hz: 1e5,
        }
    }

    fn channels(rng: &mut ChaCha8Rng, k: usize, nr: usize, nt: usize) -> Vec<CMat> {
        (0..k).map(|_| complex_gaussian(rng, nr, nt, 1.0)).collect()
    }

    #[test]
    fn total_power_cases() {
        assert!((total_power(0.0, &model()).unwrap() - 30.0).abs() < 1e-9);
        let zero = PowerModel { p_c: 0.0, p_0: 0.0, p_s: 0.0, ..model() };
        assert_eq!(total_power(2.5, &zero).unwrap(), 2.5);
        let red = model().with_rf_chains(8);
        assert!((total_power(1.0, &red).unwrap() - (1.0 + 8.0 + 10.0 + 4.0)).abs() < 1e-9);
        assert!(total_power(-1.0, &model()).is_err());
    }

    #[test]
    fn mac_rate_cases() {
        let h = vec![CMat::from_element(1, 1, C64::new(1.0, 0.0))];
        let s = CovarianceSet { s: vec![CMat::from_element(1, 1, C64::new(1.0, 0.0))] };
        assert!((mac_sum_rate(&s, &h).unwrap() - LN_2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = channels(&mut rng, 3, 2, 5);
        assert_eq!(mac_sum_rate(&CovarianceSet { s: vec![CMat::zeros(2, 2); 3] }, &h).unwrap(), 0.0);
    }

    #[test]
    fn mac_rate_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let h = channels(&mut rng, 3, 2, 6);
            let s = CovarianceSet {
                s: (0..3).map(|_| gram(&complex_gaussian(&mut rng, 2, 2, 1.0))).collect(),
            };
            let mut d = eye(6);
            for (hk, sk) in h.iter().zip(&s.s) {
                d += hk.adjoint() * sk * hk;
            }
            let oracle: f64 = d.symmetric_eigenvalues().iter().map(|v| v.ln()).sum();
            let r = mac_sum_rate(&s, &h).unwrap();
            assert!((r - oracle).abs() < 1e-10 * oracle.abs());
        }
    }

    /// `ln|I + H_k Q_k H_k^H (I + Σ_{j≠k} H_k Q_j H_k^H)^{-1}|` through a general determinant.
    fn direct_rate(p: &[CMat], h: &[CMat], k: usize) -> f64 {
        let nr = h[k].nrows();
        let mut noise = eye(nr);
        for (j, pj) in p.iter().enumerate() {
            if j != k {
                noise += &h[k] * pj * pj.adjoint() * h[k].adjoint();
            }
        }
        let m = eye(nr) + &h[k] * &p[k] * p[k].adjoint() * h[k].adjoint() * inv_hpd(&noise).unwrap();
        m.determinant().norm().ln()
    }

    #[test]
    fn lp_difference_form_matches_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let h = channels(&mut rng, 3, 2, 5);
            let p: Vec<CMat> = (0..3).map(|_| complex_gaussian(&mut rng, 5, 2, 1.0)).collect();
            for k in 0..3 {
                let a = lp_user_rate(&p, &h, k).unwrap();
                let b = direct_rate(&p, &h, k);
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn lp_rate_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = channels(&mut rng, 1, 2, 4);
        let p = vec![complex_gaussian(&mut rng, 4, 2, 1.0)];
        let single = logdet_hpd(&(eye(2) + &h[0] * &p[0] * p[0].adjoint() * h[0].adjoint())).unwrap();
        assert!((lp_user_rate(&p, &h, 0).unwrap() - single).abs() < 1e-12);
        let h = channels(&mut rng, 2, 2, 4);
        assert_eq!(lp_sum_rate(&vec![CMat::zeros(4, 2); 2], &h).unwrap(), 0.0);
    }

    #[test]
    fn ee_scaling_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = channels(&mut rng, 2, 2, 4);
        let zero = CovarianceSet { s: vec![CMat::zeros(2, 2); 2] };
        assert_eq!(ee_dpc(&zero, &h, &model()).unwrap(), 0.0);
        let s = CovarianceSet::uniform(2, 2, 1.0);
        let m2 = PowerModel { bandwidth_hz: 2e5, ..model() };
        let (a, b) = (ee_dpc(&s, &h, &model()).unwrap(), ee_dpc(&s, &h, &m2).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn isotropic_precoders_use_full_budget() {
        let p = isotropic_precoders(4, 16, 2.0);
        assert!((lp_transmit_power(&p) - 2.0).abs() < 1e-12);
        let (total, _) = lp_covariances(&p);
        assert!((total - eye(16).scale(2.0 / 16.0)).norm() < 1e-12);
    }

    #[test]
    fn reduced_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for nt in [4, 16, 32] {
            let r = reduce_problem(&channels(&mut rng, 4, 2, nt));
            assert_eq!(r.hbar.shape(), (8, 8));
            assert_eq!(r.hbar_k[0].shape(), (2, 8));
        }
    }

    proptest! {
        #[test]
        fn reduced_matches_full(seed in 0u64..10_000, nt in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = channels(&mut rng, 3, 2, nt);
            let r = reduce_problem(&h);
            let x: Vec<CMat> = (0..3).map(|_| complex_gaussian(&mut rng, 6, 2, 1.0)).collect();
            let p = r.recover(&x);
            for k in 0..3 {
                let a = r.user_rate(&x, k).unwrap();
                let b = lp_user_rate(&p, &h, k).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
            let (pa, pb) = (r.transmit_power(&x), lp_transmit_power(&p));
            prop_assert!((pa - pb).abs() <= 1e-10 * pb);
        }

        #[test]
        fn rates_invariant_under_receive_rotation(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = channels(&mut rng, 2, 2, 4);
            let p: Vec<CMat> = (0..2).map(|_| complex_gaussian(&mut rng, 4, 2, 1.0)).collect();
            let s = CovarianceSet { s: (0..2).map(|_| gram(&complex_gaussian(&mut rng, 2, 2, 1.0))).collect() };
            let rot: Vec<CMat> = h.iter().map(|hk| {
                let q = complex_gaussian(&mut rng, 2, 2, 1.0).qr().q();
                &q * hk
            }).collect();
            let lp = lp_sum_rate(&p, &h).unwrap();
            prop_assert!(lp >= 0.0);
            prop_assert!((lp - lp_sum_rate(&p, &rot).unwrap()).abs() <= 1e-10 * lp.max(1.0));
            // the MAC rate is invariant when the covariances rotate along
            let s_rot = CovarianceSet { s: s.s.iter().zip(&h).zip(&rot).map(|((sk, hk), rk)| {
                let q = rk * hk.adjoint() * inv_hpd(&(hk * hk.adjoint())).unwrap();
                &q * sk * q.adjoint()
            }).collect() };
            let m = mac_sum_rate(&s, &h).unwrap();
            prop_assert!((m - mac_sum_rate(&s_rot, &rot).unwrap()).abs() <= 1e-9 * m.max(1.0));
        }
    }
}
