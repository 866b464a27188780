//! Posterior sampling for the location-scale TrUST distribution.

use nalgebra::DMatrix;

use super::config::{McmcConfig, PriorConfig};
use super::likelihood::LatentState;
use super::sampler::{self, AdaptState, AugmentedTarget, ChainState, ModelKind, PosteriorDraws, Transformed};
use super::theta::{Component, Theta};
use crate::error::{Result, TrustError};
use crate::numkernel::RngStream;
use crate::trust::{log_pdf_joint, LocationScale, TrustParams};

/// y_i = μ + S z_i with z_i ~ TrUST. A standardized target holds μ = 0 and
/// s = 1 fixed, so θ carries no location-scale block.
pub struct DistributionTarget<'a> {
    y: &'a DMatrix<f64>,
    standardized: bool,
}

impl<'a> DistributionTarget<'a> {
    pub fn new(y: &'a DMatrix<f64>, q: usize) -> Result<Self> {
        validate_data(y, q)?;
        Ok(DistributionTarget { y, standardized: false })
    }

    pub fn standardized(y: &'a DMatrix<f64>, q: usize) -> Result<Self> {
        validate_data(y, q)?;
        Ok(DistributionTarget { y, standardized: true })
    }
}

/// Rejects data that cannot support a fit with q latent factors.
pub fn validate_data(y: &DMatrix<f64>, q: usize) -> Result<()> {
    let (n, d) = (y.nrows(), y.ncols());
    if d == 0 {
        return Err(TrustError::validation("no data columns"));
    }
    if n < d + q + 2 {
        return Err(TrustError::validation(format!("n = {n} is too small for d = {d}, q = {q}")));
    }
    if let Some((i, j)) = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).find(|&(i, j)| !y[(i, j)].is_finite()) {
        return Err(TrustError::validation(format!("non-finite value at row {}, column {}", i + 1, j + 1)));
    }
    for j in 0..d {
        let c = y.column(j);
        if c.iter().all(|&v| v == c[0]) {
            return Err(TrustError::validation(format!("column {} is constant", j + 1)));
        }
    }
    Ok(())
}

/// Sample correlation of the columns of x.
pub(crate) fn sample_corr(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = (x.nrows() as f64, x.ncols());
    let means: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n).collect();
    let mut c = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v: f64 = x.column(a).iter().zip(x.column(b).iter()).map(|(u, w)| (u - means[a]) * (w - means[b])).sum();
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    let sd: Vec<f64> = (0..d).map(|j| c[(j, j)].sqrt()).collect();
    DMatrix::from_fn(d, d, |a, b| if a == b { 1.0 } else { c[(a, b)] / (sd[a] * sd[b]) })
}

impl AugmentedTarget for DistributionTarget<'_> {
    fn kind(&self) -> ModelKind {
        ModelKind::Distribution
    }

    fn n(&self) -> usize {
        self.y.nrows()
    }

    fn d(&self) -> usize {
        self.y.ncols()
    }

    fn initial_guess(&self) -> Result<(DMatrix<f64>, Option<LocationScale>)> {
        if self.standardized {
            return Ok((sample_corr(self.y), None));
        }
        let (n, d) = (self.n() as f64, self.d());
        let mu: Vec<f64> = (0..d).map(|j| self.y.column(j).sum() / n).collect();
        let s: Vec<f64> = (0..d)
            .map(|j| (self.y.column(j).iter().map(|v| (v - mu[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            .collect();
        Ok((sample_corr(self.y), Some(LocationScale::new(mu, s)?)))
    }

    fn transform(&self, theta: &Theta, _p: &TrustParams) -> Result<Transformed> {
        let Some(ls) = theta.loc_scale.as_ref() else {
            return Ok(Transformed { z: self.y.clone(), log_jac: 0.0 });
        };
        let z = DMatrix::from_fn(self.n(), self.d(), |i, j| (self.y[(i, j)] - ls.mu[j]) / ls.s[j]);
        Ok(Transformed {
            z,
            log_jac: -(self.n() as f64) * ls.log_det(),
        })
    }

    fn transform_depends_on(&self, c: Component) -> bool {
        matches!(c, Component::Mu(_) | Component::Scale(_))
    }

    fn exact_loglik(&self, _theta: &Theta, p: &TrustParams, tr: &Transformed) -> Result<f64> {
        let mut total = tr.log_jac;
        let mut row = vec![0.0; self.d()];
        for i in 0..self.n() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = tr.z[(i, j)];
            }
            total += log_pdf_joint(&row, p)?;
        }
        Ok(total)
    }
}

/// Observed-data log likelihood of y at θ; μ = 0, s = 1 when θ has no
/// location-scale block.
pub fn log_likelihood(theta: &Theta, y: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let target = DistributionTarget { y, standardized: theta.loc_scale.is_none() };
    let p = theta.params(eps)?;
    let tr = target.transform(theta, &p)?;
    target.exact_loglik(theta, &p, &tr)
}

/// Runs the sampler for the location-scale distribution with q latent factors.
pub fn run_mcmc(y: &DMatrix<f64>, q: usize, cfg: &McmcConfig, prior: &PriorConfig, rng: &mut RngStream) -> Result<PosteriorDraws> {
    let target = DistributionTarget::new(y, q)?;
    sampler::run_chain(&target, q, cfg, prior, rng, |_| {})
}

/// As [`run_mcmc`] with μ = 0 and s = 1 held fixed.
pub fn run_mcmc_standardized(y: &DMatrix<f64>, q: usize, cfg: &McmcConfig, prior: &PriorConfig, rng: &mut RngStream) -> Result<PosteriorDraws> {
    let target = DistributionTarget::standardized(y, q)?;
    sampler::run_chain(&target, q, cfg, prior, rng, |_| {})
}

/// One Step-3 sweep at fixed latents. Returns the new θ; the latent columns
/// are relabeled in place whenever the latent order changes.
pub fn step3_update_theta(
    theta: &Theta,
    latents: &mut LatentState,
    y: &DMatrix<f64>,
    prior: &PriorConfig,
    nu_free: bool,
    adapt: &mut AdaptState,
    rng: &mut RngStream,
) -> Result<Theta> {
    let target = DistributionTarget { y, standardized: theta.loc_scale.is_none() };
    let mut state = ChainState::new(&target, theta.clone(), latents.clone(), prior, nu_free)?;
    sampler::step3_sweep(&target, &mut state, prior, nu_free, adapt, rng)?;
    *latents = state.latents;
    Ok(state.theta)
}
