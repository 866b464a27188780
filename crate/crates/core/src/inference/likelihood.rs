//! Extended likelihood of (Z, L, W) and the prior.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::config::PriorConfig;
use super::theta::Theta;
use crate::error::{Result, TrustError};
use crate::numkernel::angles::AngleSet;
use crate::numkernel::univariate::LN_SQRT_2PI;
use crate::trust::TrustParams;

/// Data-augmentation latents: L (n×q, positive) and W (n, positive).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub l: DMatrix<f64>,
    pub w: DVector<f64>,
}

impl LatentState {
    pub fn new(l: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        if l.nrows() != w.len() {
            return Err(TrustError::domain("L and W disagree on the number of observations"));
        }
        if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(TrustError::domain("latent values must be positive and finite"));
        }
        Ok(LatentState { l, w })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Permutes the latent columns like the columns of A.
    pub(crate) fn permute_columns(&mut self, perm: &[usize]) {
        let old = self.l.clone();
        for (k, &p) in perm.iter().enumerate() {
            self.l.set_column(k, &old.column(p));
        }
    }
}

/// Per-point constants of the extended density.
pub(crate) struct ExtendedTerms {
    log_det_sigma: f64,
    gamma_const: f64,
}

impl ExtendedTerms {
    pub(crate) fn new(p: &TrustParams) -> Self {
        let q = p.q();
        let log_det_sigma = if q > 0 {
            let c = p.sigma().clone().cholesky().expect("Σ checked at construction");
            2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
        } else {
            0.0
        };
        let gamma_const = if p.is_gaussian() {
            0.0
        } else {
            let a = 0.5 * p.nu();
            a * a.ln() - ln_gamma(a)
        };
        ExtendedTerms {
            log_det_sigma,
            gamma_const,
        }
    }
}

/// Σ_i log f_{Z,L,W}(z_i, l_i, w_i) for standardized z (n×d). Under the
/// Gaussian limit W ≡ 1 and its density is omitted.
pub(crate) fn log_extended_core(p: &TrustParams, terms: &ExtendedTerms, z: &DMatrix<f64>, lat: &LatentState) -> f64 {
    let (d, q) = (p.dim(), p.q());
    let n = z.nrows();
    let reg = p.regression();
    let ci = p.conditional_inv();
    let si = p.sigma_inv();
    let df = d as f64;
    let qf = q as f64;
    let base = -(df + qf) * LN_SQRT_2PI - 0.5 * p.log_det_conditional() - 0.5 * terms.log_det_sigma - p.log_t0();
    let nu = p.nu();
    let mut resid = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        let w = lat.w[i];
        for j in 0..d {
            let mut m = 0.0;
            for k in 0..q {
                m += reg[(j, k)] * lat.l[(i, k)];
            }
            resid[j] = z[(i, j)] - m;
        }
        let mut qz = 0.0;
        for a in 0..d {
            let mut row = 0.0;
            for b in 0..d {
                row += ci[(a, b)] * resid[b];
            }
            qz += resid[a] * row;
        }
        let mut ql = 0.0;
        for a in 0..q {
            let mut row = 0.0;
            for b in 0..q {
                row += si[(a, b)] * lat.l[(i, b)];
            }
            ql += lat.l[(i, a)] * row;
        }
        let lw = w.ln();
        let mut v = base + 0.5 * (df + qf) * lw - 0.5 * w * (qz + ql);
        if !p.is_gaussian() {
            v += terms.gamma_const + (0.5 * nu - 1.0) * lw - 0.5 * nu * w;
        }
        total += v;
    }
    total
}

/// Standardized observations z_i = S⁻¹(y_i − μ), with log det S⁻¹ per row.
pub(crate) fn standardize_rows(theta: &Theta, y: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    match &theta.loc_scale {
        None => (y.clone(), 0.0),
        Some(ls) => {
            let z = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| (y[(i, j)] - ls.mu[j]) / ls.s[j]);
            (z, -ls.log_det())
        }
    }
}

/// log of the extended likelihood det(S)^{-n} Π f_{Z,L,W}(z_i, l_i, w_i; θ).
pub fn log_extended_likelihood(theta: &Theta, latents: &LatentState, y: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let p = theta.params(eps)?;
    check_shapes(&p, latents, y)?;
    let (z, jac) = standardize_rows(theta, y);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TrustError::domain("standardized data must be finite"));
    }
    let terms = ExtendedTerms::new(&p);
    Ok(log_extended_core(&p, &terms, &z, latents) + jac * y.nrows() as f64)
}

pub(crate) fn check_shapes(p: &TrustParams, lat: &LatentState, y: &DMatrix<f64>) -> Result<()> {
    if y.ncols() != p.dim() || lat.l.ncols() != p.q() || lat.n() != y.nrows() {
        return Err(TrustError::domain("data, latents and parameters disagree in shape"));
    }
    Ok(())
}

/// log p₀(θ) + log 1(h ascending); −∞ outside the support.
pub fn log_prior(theta: &Theta, cfg: &PriorConfig) -> f64 {
    let base = log_prior_unordered(theta, cfg, true);
    if !base.is_finite() {
        return base;
    }
    match theta.params(cfg.eps) {
        Ok(p) if p.is_identified() => base,
        _ => f64::NEG_INFINITY,
    }
}

/// The prior without the ordering indicator, which is invariant to the
/// column order of A. `nu_free` drops the ν term when ν is held fixed.
pub(crate) fn log_prior_unordered(theta: &Theta, cfg: &PriorConfig, nu_free: bool) -> f64 {
    let mut lp = 0.0;
    for (k, &v) in theta.psi.as_slice().iter().enumerate() {
        let (lo, hi) = AngleSet::bounds_of(k, cfg.eps);
        if !(v > lo && v < hi) {
            return f64::NEG_INFINITY;
        }
        lp -= (hi - lo).ln();
    }
    let var = cfg.alpha_variance;
    for &a in theta.alpha.iter() {
        if !a.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * a * a / var;
    }
    if nu_free && theta.nu.is_finite() {
        let x = theta.nu - cfg.nu_shift;
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (cfg.nu_shape, cfg.nu_rate);
        lp += a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x;
    } else if !(theta.nu > cfg.nu_shift) {
        return f64::NEG_INFINITY;
    }
    if let Some(ls) = &theta.loc_scale {
        if ls.s.iter().any(|s| !(*s > 0.0)) || ls.mu.iter().any(|m| !m.is_finite()) {
            return f64::NEG_INFINITY;
        }
        if cfg.reference_loc_scale {
            lp -= ls.s.iter().map(|s| s.ln()).sum::<f64>();
        }
    }
    lp
}
