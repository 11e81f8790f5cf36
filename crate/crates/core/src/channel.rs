//! SIM geometry, Rayleigh-Sommerfeld inter-layer propagation, and the
//! spatially correlated user channels.
//!
//! Conventions: every planar array lies parallel to the xy-plane with its
//! normal along +z. The BS antenna array sits at `z = 0` around the configured
//! midpoint and SIM layer `l` (1-based) at `z = l·λ/2`. Propagation matrices
//! are indexed `(destination, source)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{db_to_linear, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{scale_rows, to_complex, CMat, C64, ONE};

pub type Point3 = [f64; 3];

fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Most nearly square `rows × cols` factorization of `n`.
fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}

/// `n` points on a planar grid with the given pitch, centred on `center`.
pub fn planar_grid(n: usize, pitch: f64, center: Point3) -> Vec<Point3> {
    let (rows, cols) = grid_shape(n);
    let x0 = center[0] - pitch * (cols as f64 - 1.0) / 2.0;
    let y0 = center[1] - pitch * (rows as f64 - 1.0) / 2.0;
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| [x0 + pitch * c as f64, y0 + pitch * r as f64, center[2]])
        .collect()
}

/// Rayleigh-Sommerfeld propagation between two parallel planar arrays.
///
/// Entry `(m, n)` couples source `n` to destination `m`:
/// `A cosχ / d · (1/(2πd) − j/λ) · exp(j2πd/λ)` with `cosχ = Δz/d`.
pub fn propagation_matrix(
    src: &[Point3],
    dst: &[Point3],
    element_area: f64,
    wavelength: f64,
) -> Result<CMat> {
    let mut w = CMat::zeros(dst.len(), src.len());
    for (m, p) in dst.iter().enumerate() {
        for (n, q) in src.iter().enumerate() {
            let d = distance(p, q);
            if !(d > 0.0) {
                return Err(Error::Domain(format!(
                    "coincident source {n} and destination {m} in propagation matrix"
                )));
            }
            let cos_chi = (p[2] - q[2]) / d;
            let radial = C64::new(1.0 / (2.0 * PI * d), -1.0 / wavelength);
            let phase = C64::from_polar(1.0, 2.0 * PI * d / wavelength);
            w[(m, n)] = radial * phase * (element_area * cos_chi / d);
        }
    }
    Ok(w)
}

/// Log-distance path loss in dB.
pub fn path_loss_db(d: f64, d0: f64, exponent: f64, wavelength: f64) -> Result<f64> {
    if !(d0 > 0.0) || d < d0 {
        return Err(Error::Domain(format!(
            "path loss needs d >= d0 > 0 (d = {d}, d0 = {d0})"
        )));
    }
    Ok(20.0 * (4.0 * PI * d0 / wavelength).log10() + 10.0 * exponent * (d / d0).log10())
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Isotropic-scattering spatial correlation `sinc(2d/λ)` of a planar array.
pub fn sim_correlation(positions: &[Point3], wavelength: f64) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| sinc(2.0 * distance(&positions[i], &positions[j]) / wavelength))
}

/// Symmetric PSD square root of a real symmetric matrix, negative
/// eigenvalues clipped at zero.
pub fn correlation_sqrt(r: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = r.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    q * DMatrix::from_diagonal(&roots) * q.transpose()
}

/// Static placement of the BS array and the SIM layers.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub antenna_positions: Vec<Point3>,
    /// `layer_positions[l]` holds the elements of layer `l + 1`.
    pub layer_positions: Vec<Vec<Point3>>,
    pub element_area: f64,
    pub wavelength: f64,
    pub bs_midpoint: Point3,
}

impl Geometry {
    pub fn new(cfg: &SystemConfig) -> Geometry {
        let lambda = cfg.wavelength;
        let pitch = lambda / 2.0;
        let mid = cfg.bs_midpoint;
        let layer_positions = (1..=cfg.layers)
            .map(|l| planar_grid(cfg.elements, pitch, [mid[0], mid[1], mid[2] + l as f64 * pitch]))
            .collect();
        Geometry {
            antenna_positions: planar_grid(cfg.n_t, pitch, mid),
            layer_positions,
            element_area: pitch * pitch,
            wavelength: lambda,
            bs_midpoint: mid,
        }
    }

    pub fn layers(&self) -> usize {
        self.layer_positions.len()
    }

    /// Elements of the layer facing the users (the antenna array without a SIM).
    pub fn radiating_positions(&self) -> &[Point3] {
        self.layer_positions
            .last()
            .map(Vec::as_slice)
            .unwrap_or(&self.antenna_positions)
    }
}

/// Transmit SIM: fixed propagation matrices plus the programmable phases.
#[derive(Debug, Clone)]
pub struct SimStack {
    /// Antenna array to layer 1, `N × N_t`.
    w_first: CMat,
    /// Layer `l − 1` to layer `l` for `l = 2..=L`, each `N × N`.
    w_inter: Vec<CMat>,
    phases: Vec<C64>,
    response: CMat,
}

impl SimStack {
    /// Builds the propagation matrices of `geometry` with all phases at 1.
    pub fn new(geometry: &Geometry) -> Result<SimStack> {
        if geometry.layers() == 0 {
            return Err(Error::InvalidConfig("a SIM needs at least one layer".into()));
        }
        let (a, lambda) = (geometry.element_area, geometry.wavelength);
        let w_first = propagation_matrix(&geometry.antenna_positions, &geometry.layer_positions[0], a, lambda)?;
        let w_inter = geometry
            .layer_positions
            .windows(2)
            .map(|pair| propagation_matrix(&pair[0], &pair[1], a, lambda))
            .collect::<Result<Vec<_>>>()?;
        let n = w_first.nrows();
        Self::from_parts(w_first, w_inter, vec![ONE; n * geometry.layers()])
    }

    pub fn from_parts(w_first: CMat, w_inter: Vec<CMat>, phases: Vec<C64>) -> Result<SimStack> {
        let n = w_first.nrows();
        if w_inter.iter().any(|w| w.nrows() != n || w.ncols() != n) {
            return Err(Error::InvalidConfig("inter-layer matrices must be N x N".into()));
        }
        if phases.len() != n * (w_inter.len() + 1) {
            return Err(Error::InvalidConfig(format!(
                "expected {} phases, got {}",
                n * (w_inter.len() + 1),
                phases.len()
            )));
        }
        let mut stack = SimStack {
            w_first,
            w_inter,
            phases,
            response: CMat::zeros(0, 0),
        };
        stack.response = stack.response_for(&stack.phases);
        Ok(stack)
    }

    pub fn layers(&self) -> usize {
        self.w_inter.len() + 1
    }

    pub fn elements(&self) -> usize {
        self.w_first.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.w_first.ncols()
    }

    pub fn phases(&self) -> &[C64] {
        &self.phases
    }

    /// `W^l` for 1-based layer index `l`.
    pub fn propagation(&self, l: usize) -> &CMat {
        if l == 1 {
            &self.w_first
        } else {
            &self.w_inter[l - 2]
        }
    }

    /// Cached `B = Φ^L W^L ··· Φ^1 W^1` for the current phases.
    pub fn response(&self) -> &CMat {
        &self.response
    }

    /// `B` for an arbitrary phase vector, multiplied right to left.
    pub fn response_for(&self, phases: &[C64]) -> CMat {
        let n = self.elements();
        let mut b = scale_rows(&phases[..n], &self.w_first);
        for (i, w) in self.w_inter.iter().enumerate() {
            let l = i + 1;
            b = scale_rows(&phases[l * n..(l + 1) * n], &(w * &b));
        }
        b
    }

    pub fn set_phases(&mut self, phases: Vec<C64>) {
        assert_eq!(phases.len(), self.phases.len(), "phase vector length");
        self.response = self.response_for(&phases);
        self.phases = phases;
    }
}

/// One random drop: per-user last-layer channels and the end-to-end channels.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Raw last-layer (or antenna) to user channels, `N_r × N`.
    pub g: Vec<CMat>,
    /// Noise-normalized end-to-end channels `G_k B / σ`, `N_r × N_t`.
    pub h: Vec<CMat>,
    pub pathloss_db: Vec<f64>,
    pub user_midpoints: Vec<Point3>,
    pub noise_std: f64,
}

impl ChannelRealization {
    /// `G_k / σ`.
    pub fn g_normalized(&self) -> Vec<CMat> {
        self.g.iter().map(|g| g.unscale(self.noise_std)).collect()
    }

    /// `G_k B / σ` for an arbitrary cascade response.
    pub fn end_to_end(&self, b: &CMat) -> Vec<CMat> {
        self.g.iter().map(|g| (g * b).unscale(self.noise_std)).collect()
    }

    /// Recomputes `H` after a phase update.
    pub fn refresh(&mut self, b: &CMat) {
        self.h = self.end_to_end(b);
    }

    pub fn users(&self) -> usize {
        self.g.len()
    }
}

/// Draws user array midpoints on the placement lattice: x in [1.6, 2] m step
/// 1 cm, y in [−20, 20] m step 0.5 m, z in [80, 120] m step 0.5 m.
pub fn sample_user_positions<R: Rng + ?Sized>(rng: &mut R, users: usize) -> Vec<Point3> {
    (0..users)
        .map(|_| {
            let x = 1.6 + 0.01 * rng.random_range(0..=40u32) as f64;
            let y = -20.0 + 0.5 * rng.random_range(0..=80u32) as f64;
            let z = 80.0 + 0.5 * rng.random_range(0..=80u32) as f64;
            [x, y, z]
        })
        .collect()
}

/// Circularly-symmetric complex Gaussian matrix with per-entry variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

fn correlated_channels<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    midpoint: &Point3,
    positions: &[Point3],
    corr_sqrt: &CMat,
    users: &[Point3],
) -> Result<(Vec<CMat>, Vec<f64>)> {
    let mut g = Vec::with_capacity(users.len());
    let mut pl = Vec::with_capacity(users.len());
    for u in users {
        let beta = path_loss_db(distance(midpoint, u), cfg.reference_distance, cfg.path_loss_exponent, cfg.wavelength)?;
        let gbar = complex_gaussian(rng, cfg.n_r, positions.len(), db_to_linear(-beta));
        g.push(gbar * corr_sqrt);
        pl.push(beta);
    }
    Ok((g, pl))
}

/// Correlation square roots precomputed once per geometry.
#[derive(Debug, Clone)]
pub struct CorrelationCache {
    pub sim: Option<CMat>,
    pub antenna: CMat,
}

impl CorrelationCache {
    pub fn new(geometry: &Geometry) -> CorrelationCache {
        let sq = |p: &[Point3]| to_complex(&correlation_sqrt(&sim_correlation(p, geometry.wavelength)));
        CorrelationCache {
            sim: geometry.layer_positions.last().map(|p| sq(p)),
            antenna: sq(&geometry.antenna_positions),
        }
    }
}

/// Samples `G_k = Ḡ_k R_T^{1/2}` for the last SIM layer and forms `H_k = G_k B / σ`.
pub fn sample_user_channels<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    geometry: &Geometry,
    corr: &CorrelationCache,
    users: &[Point3],
    b: &CMat,
) -> Result<ChannelRealization> {
    let corr_sqrt = corr
        .sim
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("geometry has no SIM layers".into()))?;
    let (g, pathloss_db) = correlated_channels(rng, cfg, &geometry.bs_midpoint, geometry.radiating_positions(), corr_sqrt, users)?;
    let mut real = ChannelRealization {
        g,
        h: Vec::new(),
        pathloss_db,
        user_midpoints: users.to_vec(),
        noise_std: cfg.noise_power.sqrt(),
    };
    real.refresh(b);
    Ok(real)
}

/// Direct antenna-to-user channels for the no-SIM benchmark, with transmit
/// correlation from the antenna-array geometry.
pub fn sample_direct_channels<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    geometry: &Geometry,
    corr: &CorrelationCache,
    users: &[Point3],
) -> Result<ChannelRealization> {
    let (g, pathloss_db) =
        correlated_channels(rng, cfg, &geometry.bs_midpoint, &geometry.antenna_positions, &corr.antenna, users)?;
    let mut real = ChannelRealization {
        g,
        h: Vec::new(),
        pathloss_db,
        user_midpoints: users.to_vec(),
        noise_std: cfg.noise_power.sqrt(),
    };
    real.refresh(&CMat::identity(cfg.n_t, cfg.n_t));
    Ok(real)
}
