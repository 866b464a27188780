//! Conditional draws of the latents given θ and standardized data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TrustError};
use crate::numkernel::samplers::{sample_gamma, sample_trunc_normal_lower};
use crate::numkernel::RngStream;
use crate::trust::TrustParams;

/// l_ik ~ N⁺(δ_kᵀΩ⁻¹z_i, r_k / w_i), independently, with r_k = h_k.
pub fn step1_sample_l(p: &TrustParams, w: &DVector<f64>, z: &DMatrix<f64>, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let (n, d, q) = (z.nrows(), p.dim(), p.q());
    if z.ncols() != d || w.len() != n {
        return Err(TrustError::domain("data and W disagree in shape"));
    }
    if let Some(k) = p.h().iter().position(|&r| !(r > 0.0)) {
        return Err(TrustError::constraint(format!("r_{} is not positive", k + 1)));
    }
    // rows δ_kᵀΩ⁻¹
    let g = p.delta() * p.omega_inv();
    let mut l = DMatrix::zeros(n, q);
    for i in 0..n {
        for k in 0..q {
            let m: f64 = (0..d).map(|j| g[(k, j)] * z[(i, j)]).sum();
            l[(i, k)] = sample_trunc_normal_lower(m, p.h()[k] / w[i], rng)?;
        }
    }
    Ok(l)
}

/// Shape a = (d + q + ν)/2 of the conditional of each w_i.
pub fn step2_shape(p: &TrustParams) -> f64 {
    0.5 * (p.dim() as f64 + p.q() as f64 + p.nu())
}

/// Rates b_i = ½[(z_i − ΔᵀΣ⁻¹l_i)ᵀ C⁻¹ (z_i − ΔᵀΣ⁻¹l_i) + l_iᵀΣ⁻¹l_i + ν], C = Ω − ΔᵀΣ⁻¹Δ.
pub fn step2_rates(p: &TrustParams, l: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (n, d, q) = (z.nrows(), p.dim(), p.q());
    if z.ncols() != d || l.nrows() != n || l.ncols() != q {
        return Err(TrustError::domain("data and L disagree in shape"));
    }
    let zt = z.transpose();
    let lt = l.transpose();
    let resid = &zt - p.regression() * &lt;
    let a = p.conditional_inv() * &resid;
    let b = p.sigma_inv() * &lt;
    Ok(DVector::from_fn(n, |i, _| {
        let qz = resid.column(i).dot(&a.column(i));
        let ql = if q > 0 { lt.column(i).dot(&b.column(i)) } else { 0.0 };
        0.5 * (qz + ql + p.nu())
    }))
}

/// w_i ~ Gamma(a, b_i) independently; W ≡ 1 in the Gaussian limit.
pub fn step2_sample_w(p: &TrustParams, l: &DMatrix<f64>, z: &DMatrix<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    if p.is_gaussian() {
        return Ok(DVector::from_element(z.nrows(), 1.0));
    }
    let b = step2_rates(p, l, z)?;
    let a = step2_shape(p);
    let mut w = DVector::zeros(b.len());
    for i in 0..b.len() {
        w[i] = sample_gamma(a, b[i], rng)?;
    }
    Ok(w)
}
