//! Hyper-spherical angle parameterization of correlation matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};

/// Default lower/upper margin keeping angles away from singular correlation matrices.
pub const ANGLE_EPS: f64 = 0.03;

/// Angles ψ_ij for 1 <= j < i <= d, stored row by row (ψ_21, ψ_31, ψ_32, ψ_41, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    d: usize,
    psi: Vec<f64>,
}

#[inline]
fn offset(i: usize, j: usize) -> usize {
    // zero-based i > j
    i * (i - 1) / 2 + j
}

impl AngleSet {
    pub fn new(d: usize, psi: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(TrustError::domain("dimension must be positive"));
        }
        if psi.len() != d * (d - 1) / 2 {
            return Err(TrustError::domain(format!(
                "expected {} angles for d={d}, got {}",
                d * (d - 1) / 2,
                psi.len()
            )));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(TrustError::domain("angles must be finite"));
        }
        Ok(AngleSet { d, psi })
    }

    /// All angles π/2, i.e. Ω = I.
    pub fn identity(d: usize) -> Self {
        AngleSet {
            d,
            psi: vec![PI / 2.0; d * (d.max(1) - 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// ψ_ij with zero-based indices i > j.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.psi[offset(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = offset(i, j);
        self.psi[k] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psi
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.psi
    }

    /// Zero-based (i, j) of the k-th stored angle.
    pub fn index_of(k: usize) -> (usize, usize) {
        let mut i = 1;
        while offset(i + 1, 0) <= k {
            i += 1;
        }
        (i, k - offset(i, 0))
    }

    /// Admissible open interval of the k-th stored angle.
    pub fn bounds_of(k: usize, eps: f64) -> (f64, f64) {
        let (i, j) = Self::index_of(k);
        angle_bounds(i, j, eps)
    }

    pub fn check_bounds(&self, eps: f64) -> Result<()> {
        for (k, &p) in self.psi.iter().enumerate() {
            let (lo, hi) = Self::bounds_of(k, eps);
            if !(p > lo && p < hi) {
                let (i, j) = Self::index_of(k);
                return Err(TrustError::domain(format!(
                    "angle psi_{}_{} = {p} outside ({lo}, {hi})",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Open interval for ψ_ij (zero-based i > j): the last angle of a row spans
/// (ε, 2π−ε), the others (ε, π−ε).
pub fn angle_bounds(i: usize, j: usize, eps: f64) -> (f64, f64) {
    if j + 1 == i {
        (eps, 2.0 * PI - eps)
    } else {
        (eps, PI - eps)
    }
}

/// Lower-triangular B with unit-norm rows such that Ω = B Bᵀ.
pub fn angles_to_cholesky(psi: &AngleSet) -> Result<DMatrix<f64>> {
    angles_to_cholesky_eps(psi, ANGLE_EPS)
}

pub fn angles_to_cholesky_eps(psi: &AngleSet, eps: f64) -> Result<DMatrix<f64>> {
    psi.check_bounds(eps)?;
    Ok(cholesky_unchecked(psi))
}

pub(crate) fn cholesky_unchecked(psi: &AngleSet) -> DMatrix<f64> {
    let d = psi.d;
    let mut b = DMatrix::zeros(d, d);
    b[(0, 0)] = 1.0;
    for i in 1..d {
        let mut prod = 1.0;
        for j in 0..i {
            let a = psi.get(i, j);
            b[(i, j)] = a.cos() * prod;
            prod *= a.sin();
        }
        b[(i, i)] = prod;
    }
    b
}

/// Ω = B Bᵀ from angles.
pub fn angles_to_corr(psi: &AngleSet, eps: f64) -> Result<DMatrix<f64>> {
    let b = angles_to_cholesky_eps(psi, eps)?;
    Ok(symmetrize(&(&b * b.transpose())))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Angles of the positive-diagonal Cholesky factor of a correlation matrix.
/// Every recovered angle lies in (0, π).
pub fn corr_to_angles(omega: &DMatrix<f64>) -> Result<AngleSet> {
    corr_to_angles_eps(omega, ANGLE_EPS)
}

pub fn corr_to_angles_eps(omega: &DMatrix<f64>, eps: f64) -> Result<AngleSet> {
    let d = omega.nrows();
    if d == 0 || omega.ncols() != d {
        return Err(TrustError::domain("correlation matrix must be square and non-empty"));
    }
    for i in 0..d {
        if (omega[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(TrustError::domain("correlation matrix must have unit diagonal"));
        }
        for j in 0..i {
            if (omega[(i, j)] - omega[(j, i)]).abs() > 1e-12 {
                return Err(TrustError::domain("correlation matrix must be symmetric"));
            }
        }
    }
    let l = omega
        .clone()
        .cholesky()
        .ok_or_else(|| TrustError::decomposition("correlation matrix is not positive definite"))?
        .unpack();
    let mut psi = AngleSet::identity(d);
    for i in 1..d {
        let row: Vec<f64> = (0..=i).map(|j| l[(i, j)]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..i {
            let rest = row[j + 1..].iter().map(|v| v * v).sum::<f64>().sqrt() / norm;
            psi.set(i, j, rest.atan2(row[j] / norm));
        }
    }
    for (k, &p) in psi.psi.iter().enumerate() {
        let (lo, hi) = AngleSet::bounds_of(k, eps);
        if !(p > lo && p < hi) {
            let (i, j) = AngleSet::index_of(k);
            return Err(TrustError::constraint(format!(
                "recovered angle psi_{}_{} = {p} outside ({lo}, {hi})",
                i + 1,
                j + 1
            )));
        }
    }
    Ok(psi)
}
