//! Posterior sampling of {Ω, A, ν} from copula data.

use nalgebra::DMatrix;

use super::data::CopulaData;
use super::density::{copula_log_density_rows, copula_scores};
use super::dependence::{asymmetry_measures, kendall, quantile_dependence_with, spearman};
use crate::error::{Result, TrustError};
use crate::inference::distribution::sample_corr;
use crate::inference::sampler::{run_chain, AugmentedTarget, ModelKind, PosteriorDraws, Transformed};
use crate::inference::{dic_with, posterior_mean, Component, DicResult, McmcConfig, PriorConfig, Theta};
use crate::numkernel::univariate::norm_quantile;
use crate::numkernel::mvcdf::QmcSettings;
use crate::numkernel::RngStream;
use crate::trust::{log_pdf_joint, LocationScale, TrustParams};

/// z_ij = F_j⁻¹(u_ij; θ), recomputed whenever Ω, A or ν moves.
pub struct CopulaTarget<'a> {
    u: &'a CopulaData,
}

impl<'a> CopulaTarget<'a> {
    pub fn new(u: &'a CopulaData, q: usize) -> Result<Self> {
        let (n, d) = (u.n(), u.d());
        if d < 2 {
            return Err(TrustError::validation("a copula needs at least two margins"));
        }
        if n < d + q + 2 {
            return Err(TrustError::validation(format!("n = {n} is too small for d = {d}, q = {q}")));
        }
        Ok(CopulaTarget { u })
    }
}

impl AugmentedTarget for CopulaTarget<'_> {
    fn kind(&self) -> ModelKind {
        ModelKind::Copula
    }

    fn n(&self) -> usize {
        self.u.n()
    }

    fn d(&self) -> usize {
        self.u.d()
    }

    fn initial_guess(&self) -> Result<(DMatrix<f64>, Option<LocationScale>)> {
        let scores = self.u.u().map(norm_quantile);
        Ok((sample_corr(&scores), None))
    }

    fn transform(&self, _theta: &Theta, p: &TrustParams) -> Result<Transformed> {
        let (z, log_margins) = copula_scores(self.u, p)?;
        Ok(Transformed { z, log_jac: -log_margins })
    }

    fn transform_depends_on(&self, c: Component) -> bool {
        c.moves_shape()
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

/// Runs the sampler on copula data with q latent factors.
pub fn fit_copula_mcmc(u: &CopulaData, q: usize, cfg: &McmcConfig, prior: &PriorConfig, rng: &mut RngStream) -> Result<PosteriorDraws> {
    let target = CopulaTarget::new(u, q)?;
    run_chain(&target, q, cfg, prior, rng, |_| {})
}

/// Σ_i log c(u_i; θ).
pub fn copula_log_likelihood(theta: &Theta, u: &CopulaData, eps: f64) -> Result<f64> {
    Ok(copula_log_density_rows(u, &theta.params(eps)?)?.iter().sum())
}

pub fn copula_dic(draws: &PosteriorDraws, u: &CopulaData) -> Result<DicResult> {
    dic_with(draws, |t| copula_log_likelihood(t, u, draws.eps))
}

#[derive(Clone, Debug)]
pub struct LogScore {
    pub per_row: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// The posterior mean was unusable and the best stored draw was scored.
    pub fallback: bool,
}

/// Per-row log copula density of new data at the posterior plug-in point.
pub fn log_score(u_new: &CopulaData, draws: &PosteriorDraws) -> Result<LogScore> {
    if draws.is_empty() {
        return Err(TrustError::validation("no stored draws"));
    }
    if u_new.d() != draws.d {
        return Err(TrustError::validation(format!(
            "held-out data has {} columns, the fit has {}",
            u_new.d(),
            draws.d
        )));
    }
    let scored = posterior_mean(draws)
        .and_then(|t| t.params(draws.eps))
        .and_then(|p| copula_log_density_rows(u_new, &p));
    let (per_row, fallback) = match scored {
        Ok(v) if v.iter().all(|x| x.is_finite()) => (v, false),
        _ => {
            let best = draws
                .loglik
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("draws are non-empty");
            (copula_log_density_rows(u_new, &draws.theta[best].params(draws.eps)?)?, true)
        }
    };
    let cumulative = per_row
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok(LogScore {
        per_row,
        cumulative,
        fallback,
    })
}

// QMC points per randomization for copula CDFs inside posterior averages
const POSTERIOR_CDF_POINTS: usize = 1 << 12;

/// Posterior mean and standard deviation of a scalar functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(v: &[f64]) -> PosteriorSummary {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    PosteriorSummary { mean, sd: var.sqrt() }
}

/// Posterior of pair dependence, computed draw by draw over every `every`-th
/// stored draw. These functionals do not depend on the latent labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPosterior {
    pub kendall: PosteriorSummary,
    pub spearman: PosteriorSummary,
    pub lambda_major: PosteriorSummary,
    pub lambda_minor: PosteriorSummary,
}

pub fn pair_posterior(draws: &PosteriorDraws, pair: (usize, usize), kappa: f64, every: usize) -> Result<PairPosterior> {
    if draws.is_empty() || every == 0 {
        return Err(TrustError::validation("no stored draws to summarize"));
    }
    let (mut k, mut s, mut ma, mut mi) = (vec![], vec![], vec![], vec![]);
    for t in draws.theta.iter().step_by(every) {
        let p = t.params(draws.eps)?;
        k.push(kendall(&p, pair)?);
        s.push(spearman(&p, pair)?);
        let (a, b) = asymmetry_measures(&quantile_dependence_with(&p, pair, kappa, QmcSettings::with_points(POSTERIOR_CDF_POINTS))?);
        ma.push(a);
        mi.push(b);
    }
    Ok(PairPosterior {
        kendall: summarize(&k),
        spearman: summarize(&s),
        lambda_major: summarize(&ma),
        lambda_minor: summarize(&mi),
    })
}
