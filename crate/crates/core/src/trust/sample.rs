//! Generative sampler: W, then L | W, then Z | L, W.

use nalgebra::{DMatrix, DVector};

use super::density::LocationScale;
use super::params::TrustParams;
use crate::error::{Result, TrustError};
use crate::numkernel::samplers::{sample_gamma, sample_std_normal};
use crate::numkernel::RngStream;

const MAX_REJECTIONS: usize = 1_000_000;

/// Draws together with the latent variables that generated them.
#[derive(Clone, Debug)]
pub struct Sample {
    /// n×d draws.
    pub draws: DMatrix<f64>,
    /// n×q latent truncation variables (all positive).
    pub l: DMatrix<f64>,
    /// n mixing variables (all positive).
    pub w: DVector<f64>,
}

/// A positive draw of N(0, Σ) by rejection; P(L > 0) = T_q(0; Σ) is bounded
/// away from zero for the Σ reachable from finite A.
fn positive_normal(chol_sigma: &DMatrix<f64>, rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
    let q = out.len();
    let mut e = vec![0.0; q];
    for _ in 0..MAX_REJECTIONS {
        for v in e.iter_mut() {
            *v = sample_std_normal(rng);
        }
        let mut ok = true;
        for i in 0..q {
            let v: f64 = (0..=i).map(|k| chol_sigma[(i, k)] * e[k]).sum();
            if v <= 0.0 {
                ok = false;
                break;
            }
            out[i] = v;
        }
        if ok {
            return Ok(());
        }
    }
    Err(TrustError::numeric("rejection sampler for the latent orthant did not terminate"))
}

/// n draws of Z (or Y = μ + S Z when `loc_scale` is given) with latents.
pub fn sample(p: &TrustParams, loc_scale: Option<&LocationScale>, n: usize, rng: &mut RngStream) -> Result<Sample> {
    let (d, q) = (p.dim(), p.q());
    if let Some(ls) = loc_scale {
        if ls.dim() != d {
            return Err(TrustError::domain("location-scale dimension differs from d"));
        }
    }
    let chol_sigma = if q > 0 {
        p.sigma()
            .clone()
            .cholesky()
            .ok_or_else(|| TrustError::constraint("Σ is not positive definite"))?
            .unpack()
    } else {
        DMatrix::zeros(0, 0)
    };
    let cc = p.conditional_chol();
    let reg = p.regression();
    let mut draws = DMatrix::zeros(n, d);
    let mut l = DMatrix::zeros(n, q);
    let mut w = DVector::zeros(n);
    let mut li = vec![0.0; q];
    let mut e = vec![0.0; d];
    for i in 0..n {
        let wi = if p.is_gaussian() { 1.0 } else { sample_gamma(0.5 * p.nu(), 0.5 * p.nu(), rng)? };
        let sd = 1.0 / wi.sqrt();
        positive_normal(&chol_sigma, rng, &mut li)?;
        for v in li.iter_mut() {
            *v *= sd;
        }
        for v in e.iter_mut() {
            *v = sample_std_normal(rng);
        }
        for j in 0..d {
            let mean: f64 = (0..q).map(|k| reg[(j, k)] * li[k]).sum();
            let noise: f64 = (0..=j).map(|k| cc[(j, k)] * e[k]).sum();
            let z = mean + sd * noise;
            draws[(i, j)] = match loc_scale {
                Some(ls) => ls.mu[j] + ls.s[j] * z,
                None => z,
            };
        }
        for k in 0..q {
            l[(i, k)] = li[k];
        }
        w[i] = wi;
    }
    Ok(Sample { draws, l, w })
}
