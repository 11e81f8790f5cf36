//! Dense complex linear algebra shared by the optimizers.
//!
//! Everything is built on `nalgebra::DMatrix<Complex64>`. Log-determinants and
//! inverses of Hermitian positive definite matrices always go through a
//! Cholesky factorization of the Hermitian part of the argument.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(m + m^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

fn cholesky(m: &CMat, what: &'static str) -> Result<Cholesky<C64, Dyn>> {
    let chol = hermitian_part(m)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite(what))?;
    // complex square roots never fail, so a negative pivot shows up as a non-real diagonal
    let l = chol.l_dirty();
    if (0..l.nrows()).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-8 * l[(i, i)].re) {
        Ok(chol)
    } else {
        Err(Error::NotPositiveDefinite(what))
    }
}

/// `ln det(m)` for Hermitian positive definite `m`.
pub fn logdet_hpd(m: &CMat) -> Result<f64> {
    let chol = cholesky(m, "log-determinant")?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

pub fn inv_hpd(m: &CMat) -> Result<CMat> {
    Ok(cholesky(m, "inverse")?.inverse())
}

/// Solves `m x = b` for Hermitian positive definite `m`.
pub fn solve_hpd(m: &CMat, b: &CMat) -> Result<CMat> {
    Ok(cholesky(m, "solve")?.solve(b))
}

/// Solves the square system `m x = b` by LU with partial pivoting.
pub fn solve(m: &CMat, b: &CMat) -> Result<CMat> {
    m.clone().lu().solve(b).ok_or(Error::Singular("LU solve"))
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
///
/// Also returns the numerical rank of `a` so callers can flag rank deficiency.
pub fn lstsq(a: &CMat, b: &CMat) -> Result<(CMat, usize)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    let rank = svd.rank(eps);
    let x = svd
        .solve(b, eps)
        .map_err(|_| Error::Singular("least-squares"))?;
    Ok((x, rank))
}

/// Symmetric square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues below zero (rounding residue) are clipped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let eig = hermitian_part(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    let q = &eig.eigenvectors;
    q * CMat::from_diagonal(&roots) * q.adjoint()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Squared Frobenius norm.
pub fn norm_sqr(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖a − b‖_F / ‖b‖_F`, guarded for a zero reference.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let d = (a - b).norm();
    let r = b.norm();
    if r > 0.0 {
        d / r
    } else {
        d
    }
}

/// `diag(d) · m`.
pub fn scale_rows(d: &[C64], m: &CMat) -> CMat {
    debug_assert_eq!(d.len(), m.nrows());
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// `m^H m`.
pub fn gram(m: &CMat) -> CMat {
    m.adjoint() * m
}

/// Converts a real matrix into a complex one.
pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}
