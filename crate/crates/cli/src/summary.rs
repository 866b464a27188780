//! The summary JSON written by every fitting and simulation command.

use serde::{Deserialize, Serialize};
use trust_core::inference::{DicResult, PosteriorDraws, Theta};

use crate::config::{Mode, ParamSpec, Real, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStat {
    pub name: String,
    pub mean: Real,
    pub sd: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub name: String,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicSummary {
    pub dic: f64,
    pub mean_loglik: f64,
    pub plug_in_loglik: f64,
    /// The posterior mean was not a valid point; the best stored draw was used.
    pub fallback: bool,
}

impl From<&DicResult> for DicSummary {
    fn from(d: &DicResult) -> Self {
        DicSummary {
            dic: d.dic,
            mean_loglik: d.mean_loglik,
            plug_in_loglik: d.plug_in_loglik,
            fallback: d.point.fallback,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    /// One-based margin indices (i > j).
    pub pair: (usize, usize),
    pub kendall: Stat,
    pub spearman: Stat,
    pub lambda_major: Stat,
    pub lambda_minor: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub corr: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub trust_core: String,
    pub trust_cli: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            trust_core: trust_core::VERSION.to_string(),
            trust_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub d: usize,
    pub q: usize,
    pub columns: Vec<String>,
    pub n_obs: usize,
    #[serde(default)]
    pub n_draws: usize,
    #[serde(default)]
    pub parameters: Vec<ParamStat>,
    #[serde(default)]
    pub acceptance: Vec<Acceptance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dic: Option<DicSummary>,
    /// Plug-in point (posterior mean, or the explicit parameters of a simulation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_estimate: Option<ParamSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependence: Vec<PairSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_moments: Option<Moments>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    pub versions: Versions,
    pub config: RunConfig,
}

pub fn param_spec(theta: &Theta) -> ParamSpec {
    ParamSpec {
        omega: None,
        angles: Some(theta.psi.as_slice().to_vec()),
        alpha: (0..theta.dim()).map(|j| theta.alpha.row(j).iter().copied().collect()).collect(),
        nu: Real(theta.nu),
        mu: theta.loc_scale.as_ref().map(|l| l.mu.clone()),
        s: theta.loc_scale.as_ref().map(|l| l.s.clone()),
    }
}

pub fn param_stats(draws: &PosteriorDraws) -> Vec<ParamStat> {
    let (m, s) = draws.mean_sd();
    draws
        .names()
        .into_iter()
        .zip(m.into_iter().zip(s))
        .map(|(name, (mean, sd))| ParamStat {
            name,
            mean: Real(mean),
            sd: Real(if sd.is_nan() { 0.0 } else { sd }),
        })
        .collect()
}

pub fn acceptance(draws: &PosteriorDraws) -> Vec<Acceptance> {
    draws
        .components
        .iter()
        .zip(&draws.acceptance)
        .map(|(name, &rate)| Acceptance { name: name.clone(), rate })
        .collect()
}
