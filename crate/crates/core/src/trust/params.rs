//! Parameter bundle {Ω, A, ν} with the derived quantities Δ, Σ and h.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::marginal::MarginalTable;
use crate::error::{Result, TrustError};
use crate::numkernel::angles::{angles_to_corr, corr_to_angles_eps, symmetrize, AngleSet, ANGLE_EPS};
use crate::numkernel::lowdim::orthant_lowdim;
use crate::numkernel::mvcdf::{mvn_cdf_with, QmcSettings};
use crate::numkernel::RngStream;

/// Seed of the fixed QMC stream used for deterministic evaluations with q > 3.
pub(crate) const FIXED_QMC_SEED: u64 = 0x7275_7374;

fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| TrustError::decomposition(format!("{what} is not positive definite")))
}

fn check_corr(omega: &DMatrix<f64>) -> Result<()> {
    let d = omega.nrows();
    if d == 0 || omega.ncols() != d {
        return Err(TrustError::domain("Ω must be square and non-empty"));
    }
    for i in 0..d {
        if !omega.row(i).iter().all(|v| v.is_finite()) {
            return Err(TrustError::domain("Ω has non-finite entries"));
        }
        if (omega[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(TrustError::domain("Ω must have a unit diagonal"));
        }
        for j in 0..i {
            if (omega[(i, j)] - omega[(j, i)]).abs() > 1e-12 {
                return Err(TrustError::domain("Ω must be symmetric"));
            }
        }
    }
    Ok(())
}

/// Row k of Δ: δ_k = Ωα_k / √(1 + α_kᵀΩα_k).
pub fn delta_from_alpha(omega: &DMatrix<f64>, alpha: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_corr(omega)?;
    cholesky(omega, "Ω")?;
    let d = omega.nrows();
    if alpha.nrows() != d {
        return Err(TrustError::domain("A must have d rows"));
    }
    let q = alpha.ncols();
    let mut delta = DMatrix::zeros(q, d);
    for k in 0..q {
        let a = alpha.column(k);
        if !a.iter().all(|v| v.is_finite()) {
            return Err(TrustError::domain("A has non-finite entries"));
        }
        let oa = omega * a;
        let scale = (1.0 + a.dot(&oa)).sqrt();
        for j in 0..d {
            delta[(k, j)] = oa[j] / scale;
        }
    }
    Ok(delta)
}

/// Column k of A: α_k = Ω⁻¹δ_k / √(1 − δ_kᵀΩ⁻¹δ_k).
pub fn alpha_from_delta(omega: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_corr(omega)?;
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| TrustError::decomposition("Ω is not positive definite"))?;
    let d = omega.nrows();
    if delta.ncols() != d {
        return Err(TrustError::domain("Δ must have d columns"));
    }
    let q = delta.nrows();
    let mut alpha = DMatrix::zeros(d, q);
    for k in 0..q {
        let dk: DVector<f64> = delta.row(k).transpose();
        let w = chol.solve(&dk);
        let quad = dk.dot(&w);
        if !(quad < 1.0) {
            return Err(TrustError::constraint(format!("δ_{}ᵀΩ⁻¹δ_{} = {quad} is not below 1", k + 1, k + 1)));
        }
        let scale = (1.0 - quad).sqrt();
        for j in 0..d {
            alpha[(j, k)] = w[j] / scale;
        }
    }
    Ok(alpha)
}

fn delta_quad(omega: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| TrustError::decomposition("Ω is not positive definite"))?;
    let dt = delta.transpose();
    Ok(symmetrize(&(delta * chol.solve(&dt))))
}

/// Σ = I + (M − diag M) with M = ΔΩ⁻¹Δᵀ.
pub fn sigma_from_delta(omega: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = delta_quad(omega, delta)?;
    let q = m.nrows();
    let mut s = m;
    for k in 0..q {
        s[(k, k)] = 1.0;
    }
    if q > 0 {
        cholesky(&s, "Σ").map_err(|_| TrustError::constraint("Σ is not positive definite"))?;
    }
    Ok(s)
}

/// h_k = 1 − δ_kᵀΩ⁻¹δ_k.
pub fn h_diag(omega: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = delta_quad(omega, delta)?;
    let h = DVector::from_fn(m.nrows(), |k, _| 1.0 - m[(k, k)]);
    if let Some(k) = h.iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(TrustError::constraint(format!("h_{} = {} outside (0, 1]", k + 1, h[k])));
    }
    Ok(h)
}

/// Identified TrUST parameter point. All derived quantities are computed at
/// construction; marginal tables are built on first use and shared by clones.
#[derive(Clone, Debug)]
pub struct TrustParams {
    omega: DMatrix<f64>,
    omega_chol: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    log_det_omega: f64,
    alpha: DMatrix<f64>,
    nu: f64,
    delta: DMatrix<f64>,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    h: DVector<f64>,
    // E[Z | L] = reg · L and Cov(Z | L, W=1) = cond
    reg: DMatrix<f64>,
    cond: DMatrix<f64>,
    cond_chol: DMatrix<f64>,
    cond_inv: DMatrix<f64>,
    log_det_cond: f64,
    log_p0: f64,
    tables: Arc<Vec<OnceLock<Arc<MarginalTable>>>>,
}

impl TrustParams {
    pub fn new(omega: DMatrix<f64>, alpha: DMatrix<f64>, nu: f64) -> Result<Self> {
        check_corr(&omega)?;
        if nu.is_nan() || nu <= 2.0 {
            return Err(TrustError::domain(format!("ν must exceed 2, got {nu}")));
        }
        let d = omega.nrows();
        if alpha.nrows() != d {
            return Err(TrustError::domain(format!("A has {} rows, expected {d}", alpha.nrows())));
        }
        let omega = symmetrize(&omega);
        let omega_chol = cholesky(&omega, "Ω")?;
        let omega_inv = symmetrize(&omega.clone().cholesky().expect("checked").inverse());
        let log_det_omega = 2.0 * omega_chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let delta = delta_from_alpha(&omega, &alpha)?;
        let q = alpha.ncols();
        let m = symmetrize(&(&delta * &omega_inv * delta.transpose()));
        let h = DVector::from_fn(q, |k, _| 1.0 - m[(k, k)]);
        // α finite implies h_k = 1/(1 + α_kᵀΩα_k) > 0, but extreme α can round to zero
        if let Some(k) = h.iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(TrustError::constraint(format!("h_{} = {} outside (0, 1]", k + 1, h[k])));
        }
        let mut sigma = m;
        for k in 0..q {
            sigma[(k, k)] = 1.0;
        }
        let (sigma_inv, reg, cond) = if q > 0 {
            let sc = sigma
                .clone()
                .cholesky()
                .ok_or_else(|| TrustError::constraint("Σ is not positive definite"))?;
            let sigma_inv = symmetrize(&sc.inverse());
            let reg = delta.transpose() * &sigma_inv;
            let cond = symmetrize(&(&omega - &reg * &delta));
            (sigma_inv, reg, cond)
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(d, 0), omega.clone())
        };
        // Schur complement of Σ in R: R is PD iff this is PD
        let cond_chol = cholesky(&cond, "Ω − ΔᵀΣ⁻¹Δ").map_err(|_| TrustError::constraint("R is not positive definite"))?;
        let cond_inv = symmetrize(&cond.clone().cholesky().expect("checked").inverse());
        let log_det_cond = 2.0 * cond_chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_p0 = log_orthant(&sigma);
        let tables = Arc::new((0..d).map(|_| OnceLock::new()).collect());
        Ok(TrustParams {
            omega,
            omega_chol,
            omega_inv,
            log_det_omega,
            alpha,
            nu,
            delta,
            sigma,
            sigma_inv,
            h,
            reg,
            cond,
            cond_chol,
            cond_inv,
            log_det_cond,
            log_p0,
            tables,
        })
    }

    /// Symmetric multivariate t (q = 0).
    pub fn symmetric(omega: DMatrix<f64>, nu: f64) -> Result<Self> {
        let d = omega.nrows();
        Self::new(omega, DMatrix::zeros(d, 0), nu)
    }

    pub fn from_angles(psi: &AngleSet, alpha: DMatrix<f64>, nu: f64, eps: f64) -> Result<Self> {
        Self::new(angles_to_corr(psi, eps)?, alpha, nu)
    }

    pub fn from_delta(omega: DMatrix<f64>, delta: &DMatrix<f64>, nu: f64) -> Result<Self> {
        let alpha = alpha_from_delta(&omega, delta)?;
        Self::new(omega, alpha, nu)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn q(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_gaussian(&self) -> bool {
        self.nu.is_infinite()
    }

    /// Δ as a q×d matrix (rows δ_kᵀ).
    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn omega_inv(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }

    pub fn omega_chol(&self) -> &DMatrix<f64> {
        &self.omega_chol
    }

    pub fn log_det_omega(&self) -> f64 {
        self.log_det_omega
    }

    /// ΔᵀΣ⁻¹ (d×q).
    pub fn regression(&self) -> &DMatrix<f64> {
        &self.reg
    }

    /// Ω − ΔᵀΣ⁻¹Δ.
    pub fn conditional_cov(&self) -> &DMatrix<f64> {
        &self.cond
    }

    pub fn conditional_chol(&self) -> &DMatrix<f64> {
        &self.cond_chol
    }

    pub fn conditional_inv(&self) -> &DMatrix<f64> {
        &self.cond_inv
    }

    pub fn log_det_conditional(&self) -> f64 {
        self.log_det_cond
    }

    /// log T_q(0; Σ, ν) = log Φ_q(0; Σ).
    pub fn log_t0(&self) -> f64 {
        self.log_p0
    }

    pub fn angles(&self) -> Result<AngleSet> {
        corr_to_angles_eps(&self.omega, 0.0)
    }

    pub fn angles_within(&self, eps: f64) -> Result<AngleSet> {
        corr_to_angles_eps(&self.omega, eps)
    }

    /// Full (d+q) correlation matrix R = [[Ω, Δᵀ], [Δ, Σ]].
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let (d, q) = (self.dim(), self.q());
        let mut r = DMatrix::zeros(d + q, d + q);
        r.view_mut((0, 0), (d, d)).copy_from(&self.omega);
        r.view_mut((d, d), (q, q)).copy_from(&self.sigma);
        r.view_mut((d, 0), (q, d)).copy_from(&self.delta);
        r.view_mut((0, d), (d, q)).copy_from(&self.delta.transpose());
        r
    }

    pub fn is_identified(&self) -> bool {
        self.h.as_slice().windows(2).all(|w| w[0] <= w[1])
    }

    /// Same point with the latent columns reordered: column k of the result
    /// is column perm[k] of self.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let q = self.q();
        let mut seen = vec![false; q];
        if perm.len() != q || perm.iter().any(|&p| p >= q || std::mem::replace(&mut seen[p], true)) {
            return Err(TrustError::domain("not a permutation of the latent columns"));
        }
        let alpha = DMatrix::from_fn(self.dim(), q, |j, k| self.alpha[(j, perm[k])]);
        Self::new(self.omega.clone(), alpha, self.nu)
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.omega.clone(), self.alpha.clone(), nu)
    }

    pub(crate) fn table_slot(&self, j: usize) -> &OnceLock<Arc<MarginalTable>> {
        &self.tables[j]
    }
}

/// Column order sorting h ascending; ties keep their original order.
pub fn identifying_order(h: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|&a, &b| h[a].partial_cmp(&h[b]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Reorders the latent columns so that h_1 <= … <= h_q.
pub fn identify(params: &TrustParams) -> TrustParams {
    let perm = identifying_order(params.h());
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        return params.clone();
    }
    params.permute(&perm).expect("a permutation of a valid point is valid")
}

/// log Φ_q(0; Σ), closed form up to q = 3.
pub(crate) fn log_orthant(sigma: &DMatrix<f64>) -> f64 {
    let q = sigma.nrows();
    if q <= 3 {
        return orthant_lowdim(sigma).ln();
    }
    let mut rng = RngStream::new(FIXED_QMC_SEED, 0);
    let zero = vec![0.0; q];
    let (p, _) = mvn_cdf_with(&zero, sigma, QmcSettings::with_points(1 << 16), &mut rng).expect("Σ already checked PD");
    p.ln()
}

/// Convenience constructor with the default angle margin.
pub fn params_from_angles(psi: &AngleSet, alpha: DMatrix<f64>, nu: f64) -> Result<TrustParams> {
    TrustParams::from_angles(psi, alpha, nu, ANGLE_EPS)
}
