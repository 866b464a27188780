//! Joint, marginal, extended, conditional and location-scale densities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::params::{TrustParams, FIXED_QMC_SEED};
use crate::error::{Result, TrustError};
use crate::numkernel::angles::symmetrize;
use crate::numkernel::lowdim::{log_t_cdf_lowdim, log_t_orthant_indep};
use crate::numkernel::mvcdf::{mvt_cdf_with, QmcSettings};
use crate::numkernel::univariate::{t_logcdf_std, LN_SQRT_2PI};
use crate::numkernel::RngStream;

/// Location μ and per-coordinate scale s of Y = μ + S Z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationScale {
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
}

impl LocationScale {
    pub fn new(mu: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if mu.len() != s.len() {
            return Err(TrustError::domain("μ and s lengths differ"));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(TrustError::domain("μ must be finite"));
        }
        if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(TrustError::domain("every s_j must be positive"));
        }
        Ok(LocationScale { mu, s })
    }

    pub fn standard(d: usize) -> Self {
        LocationScale {
            mu: vec![0.0; d],
            s: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn log_det(&self) -> f64 {
        self.s.iter().map(|v| v.ln()).sum()
    }

    /// z = S⁻¹(y − μ).
    pub fn standardize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.mu).zip(&self.s).map(|((y, m), s)| (y - m) / s).collect()
    }
}

/// Truncation shift τ of the extended distribution (hidden truncation on L + τ > 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedShift {
    pub tau: Vec<f64>,
}

impl ExtendedShift {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(TrustError::domain("τ must be finite"));
        }
        Ok(ExtendedShift { tau })
    }
}

/// Split of the coordinates into a conditioned-on block and the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl Partition {
    pub fn new(first: Vec<usize>, second: Vec<usize>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for &i in first.iter().chain(&second) {
            if i >= d || std::mem::replace(&mut seen[i], true) {
                return Err(TrustError::domain("partition indices must be distinct and below d"));
            }
        }
        if first.is_empty() || second.is_empty() || seen.iter().any(|s| !s) {
            return Err(TrustError::domain("partition must cover all coordinates with two non-empty blocks"));
        }
        Ok(Partition { first, second })
    }
}

/// (ν + a)/(ν + b), equal to one in the normal limit.
#[inline]
pub(crate) fn df_ratio(nu: f64, a: f64, b: f64) -> f64 {
    if nu.is_infinite() {
        1.0
    } else {
        (nu + a) / (nu + b)
    }
}

fn check_finite(z: &[f64]) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TrustError::domain("evaluation point must be finite"));
    }
    Ok(())
}

/// log of the d-variate t density kernel given the quadratic form q and log|S|.
pub(crate) fn log_mvt_kernel(quad: f64, log_det: f64, d: usize, nu: f64) -> f64 {
    let df = d as f64;
    if nu.is_infinite() {
        return -df * LN_SQRT_2PI - 0.5 * log_det - 0.5 * quad;
    }
    ln_gamma(0.5 * (nu + df)) - ln_gamma(0.5 * nu) - 0.5 * df * (nu * std::f64::consts::PI).ln() - 0.5 * log_det
        - 0.5 * (nu + df) * (quad / nu).ln_1p()
}

fn chol_solve_quad(l: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let y = l.solve_lower_triangular(x).expect("triangular factor has positive diagonal");
    y.norm_squared()
}

fn chol_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| TrustError::constraint(format!("{what} is not positive definite")))
}

fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// log T_q(x; S, m) for any q: deterministic up to q = 3, fixed-seed QMC beyond.
pub(crate) fn log_t_cdf(x: &[f64], s: &DMatrix<f64>, m: f64) -> Result<f64> {
    if x.len() <= 3 {
        return log_t_cdf_lowdim(x, s, m);
    }
    let mut rng = RngStream::new(FIXED_QMC_SEED, 1);
    let (p, _) = mvt_cdf_with(x, s, m, QmcSettings::with_points(1 << 15), &mut rng)?;
    if !(p > 0.0) {
        return Err(TrustError::numeric("multivariate t probability underflowed"));
    }
    Ok(p.ln())
}

/// log t_d(z; Ω, ν) and Q(z) = zᵀΩ⁻¹z.
pub(crate) fn log_t_part(z: &[f64], p: &TrustParams) -> (f64, f64) {
    let zv = DVector::from_column_slice(z);
    let quad = chol_solve_quad(p.omega_chol(), &zv);
    (log_mvt_kernel(quad, p.log_det_omega(), p.dim(), p.nu()), quad)
}

/// √((ν + d)/(ν + Q)) Aᵀz, the standardized truncation arguments.
pub(crate) fn skew_args(z: &[f64], quad: f64, p: &TrustParams) -> Vec<f64> {
    let c = df_ratio(p.nu(), p.dim() as f64, quad).sqrt();
    let a = p.alpha();
    (0..p.q())
        .map(|k| c * (0..p.dim()).map(|j| a[(j, k)] * z[j]).sum::<f64>())
        .collect()
}

/// log f_TrUST(z): t_d(z; Ω, ν) T_q(c Aᵀz; I, ν + d) / T_q(0; Σ, ν).
///
/// The latent coordinates are conditionally independent given z but share
/// the mixing variable, so the numerator is a q-variate t probability with
/// identity scale; it factorizes into univariate terms only for q = 1 or in
/// the normal limit. See [`log_pdf_joint_factorized`] for the product form.
pub fn log_pdf_joint(z: &[f64], p: &TrustParams) -> Result<f64> {
    if z.len() != p.dim() {
        return Err(TrustError::domain("evaluation point has the wrong dimension"));
    }
    check_finite(z)?;
    let (lt, quad) = log_t_part(z, p);
    if p.q() == 0 {
        return Ok(lt);
    }
    let x = skew_args(z, quad, p);
    Ok(lt + log_t_orthant_indep(&x, p.nu() + p.dim() as f64) - p.log_t0())
}

/// Product form t_d(z; Ω, ν) Π_k T₁(c α_kᵀz; ν + d) / T_q(0; Σ, ν). It equals
/// [`log_pdf_joint`] for q <= 1 and for ν = ∞, and is otherwise only an
/// approximation that does not integrate to one.
pub fn log_pdf_joint_factorized(z: &[f64], p: &TrustParams) -> Result<f64> {
    if z.len() != p.dim() {
        return Err(TrustError::domain("evaluation point has the wrong dimension"));
    }
    check_finite(z)?;
    let (lt, quad) = log_t_part(z, p);
    let m = p.nu() + p.dim() as f64;
    let x = skew_args(z, quad, p);
    Ok(lt + x.iter().map(|&v| t_logcdf_std(v, m)).sum::<f64>() - p.log_t0())
}

/// log density of the sub-vector z_b, b = `idx`:
/// t(z_b; Ω_b, ν) T_q(c Δ_b Ω_b⁻¹ z_b; Σ − Δ_b Ω_b⁻¹ Δ_bᵀ, ν + d_b) / T_q(0; Σ, ν).
pub fn log_pdf_marginal_block(z_sub: &[f64], idx: &[usize], p: &TrustParams) -> Result<f64> {
    let db = idx.len();
    if db == 0 || z_sub.len() != db || idx.iter().any(|&i| i >= p.dim()) {
        return Err(TrustError::domain("invalid marginal block"));
    }
    check_finite(z_sub)?;
    let ob = DMatrix::from_fn(db, db, |a, b| p.omega()[(idx[a], idx[b])]);
    let lb = chol_lower(&ob, "Ω_b")?;
    let zb = DVector::from_column_slice(z_sub);
    let quad = chol_solve_quad(&lb, &zb);
    let lt = log_mvt_kernel(quad, log_det_from_chol(&lb), db, p.nu());
    let q = p.q();
    if q == 0 {
        return Ok(lt);
    }
    let delta_b = DMatrix::from_fn(q, db, |k, a| p.delta()[(k, idx[a])]);
    let chol_b = ob.cholesky().expect("checked above");
    let w = chol_b.solve(&zb);
    let loc = &delta_b * &w;
    let scale = symmetrize(&(p.sigma() - &delta_b * chol_b.solve(&delta_b.transpose())));
    let c = df_ratio(p.nu(), db as f64, quad).sqrt();
    let x: Vec<f64> = loc.iter().map(|v| c * v).collect();
    Ok(lt + log_t_cdf(&x, &scale, p.nu() + db as f64)? - p.log_t0())
}

/// log f_UST(z_j): density of the j-th margin.
pub fn log_pdf_marginal(zj: f64, j: usize, p: &TrustParams) -> Result<f64> {
    if j >= p.dim() {
        return Err(TrustError::domain("margin index out of range"));
    }
    log_pdf_marginal_block(&[zj], &[j], p)
}

/// Extended density with truncation L + τ > 0:
/// t(z; Ω, ν) T_q(c(τ̃ + Aᵀz); I, ν + d) / T_q(τ; Σ, ν), τ̃_k = τ_k / √h_k.
pub fn log_pdf_extended(z: &[f64], p: &TrustParams, tau: &ExtendedShift) -> Result<f64> {
    if tau.tau.len() != p.q() {
        return Err(TrustError::domain("τ must have q entries"));
    }
    if tau.tau.iter().all(|&t| t == 0.0) {
        return log_pdf_joint(z, p);
    }
    if z.len() != p.dim() {
        return Err(TrustError::domain("evaluation point has the wrong dimension"));
    }
    check_finite(z)?;
    let (lt, quad) = log_t_part(z, p);
    let c = df_ratio(p.nu(), p.dim() as f64, quad).sqrt();
    let a = p.alpha();
    let x: Vec<f64> = (0..p.q())
        .map(|k| {
            let az: f64 = (0..p.dim()).map(|j| a[(j, k)] * z[j]).sum();
            c * (tau.tau[k] / p.h()[k].sqrt() + az)
        })
        .collect();
    let num = log_t_orthant_indep(&x, p.nu() + p.dim() as f64);
    let den = log_t_cdf(&tau.tau, p.sigma(), p.nu())?;
    Ok(lt + num - den)
}

/// log f(z₁ | z₂): a t density centred at μ* = Ω₁₂Ω₂⁻¹z₂ with scale
/// ((ν + Q₂)/(ν + d₂))Ω* and ν + d₂ degrees of freedom, times the ratio of the
/// full-vector truncation probability to that of the conditioning block.
pub fn log_pdf_conditional(z1: &[f64], z2: &[f64], part: &Partition, p: &TrustParams) -> Result<f64> {
    let (i1, i2) = (&part.first, &part.second);
    let (d1, d2) = (i1.len(), i2.len());
    if z1.len() != d1 || z2.len() != d2 || d1 + d2 != p.dim() {
        return Err(TrustError::domain("conditional evaluation point does not match the partition"));
    }
    check_finite(z1)?;
    check_finite(z2)?;
    let om = p.omega();
    let o2 = DMatrix::from_fn(d2, d2, |a, b| om[(i2[a], i2[b])]);
    let o12 = DMatrix::from_fn(d1, d2, |a, b| om[(i1[a], i2[b])]);
    let o1 = DMatrix::from_fn(d1, d1, |a, b| om[(i1[a], i1[b])]);
    let c2 = o2
        .clone()
        .cholesky()
        .ok_or_else(|| TrustError::decomposition("Ω₂ is not positive definite"))?;
    let z2v = DVector::from_column_slice(z2);
    let w2 = c2.solve(&z2v);
    let q2 = z2v.dot(&w2);
    let mu = &o12 * &w2;
    let o_star = symmetrize(&(&o1 - &o12 * c2.solve(&o12.transpose())));
    let k = df_ratio(p.nu(), q2, d2 as f64);
    let scale = o_star * k;
    let ls = chol_lower(&scale, "conditional scale")?;
    let resid = DVector::from_fn(d1, |a, _| z1[a] - mu[a]);
    let quad1 = chol_solve_quad(&ls, &resid);
    let lt = log_mvt_kernel(quad1, log_det_from_chol(&ls), d1, p.nu() + d2 as f64);
    let q = p.q();
    if q == 0 {
        return Ok(lt);
    }
    let mut z = vec![0.0; p.dim()];
    for (a, &i) in i1.iter().enumerate() {
        z[i] = z1[a];
    }
    for (a, &i) in i2.iter().enumerate() {
        z[i] = z2[a];
    }
    let (_, quad) = log_t_part(&z, p);
    let num = log_t_orthant_indep(&skew_args(&z, quad, p), p.nu() + p.dim() as f64);
    let delta2 = DMatrix::from_fn(q, d2, |kk, a| p.delta()[(kk, i2[a])]);
    let loc = &delta2 * &w2;
    let s2 = symmetrize(&((p.sigma() - &delta2 * c2.solve(&delta2.transpose())) * k));
    let den = log_t_cdf(loc.as_slice(), &s2, p.nu() + d2 as f64)?;
    Ok(lt + num - den)
}

/// log f(y; μ, S) = log f_TrUST(S⁻¹(y − μ)) − Σ log s_j.
pub fn log_pdf_location_scale(y: &[f64], ls: &LocationScale, p: &TrustParams) -> Result<f64> {
    if ls.s.iter().any(|&v| !(v > 0.0)) {
        return Err(TrustError::domain("every s_j must be positive"));
    }
    if y.len() != ls.dim() || ls.dim() != p.dim() {
        return Err(TrustError::domain("dimension mismatch between y, location-scale and parameters"));
    }
    Ok(log_pdf_joint(&ls.standardize(y), p)? - ls.log_det())
}
