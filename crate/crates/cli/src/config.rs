//! The JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use trust_core::inference::{McmcConfig, PriorConfig};
use trust_core::numkernel::angles::{corr_to_angles_eps, AngleSet};
use trust_core::trust::{LocationScale, TrustParams};
use trust_core::DMatrix;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    FitDist,
    FitCopula,
    PseudoObs,
    Dependence,
    Score,
    DensityGrid,
}

impl Mode {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Mode::Simulate | Mode::FitDist | Mode::FitCopula)
    }
}

/// A real number that may be written as the string "inf".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Str(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(Real(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// A parameter point given by correlations or angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    /// d rows of q values; empty rows (or omitted) for q = 0.
    #[serde(default)]
    pub alpha: Vec<Vec<f64>>,
    pub nu: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
}

impl ParamSpec {
    pub fn dim(&self) -> CliResult<usize> {
        match (&self.omega, &self.angles) {
            (Some(o), None) => Ok(o.len()),
            (None, Some(a)) => {
                let d = ((1.0 + (1.0 + 8.0 * a.len() as f64).sqrt()) / 2.0).round() as usize;
                if d * (d - 1) / 2 != a.len() {
                    return Err(CliError::validation(format!("{} angles do not fit any dimension", a.len())));
                }
                Ok(d)
            }
            _ => Err(CliError::validation("give exactly one of \"omega\" and \"angles\"")),
        }
    }

    pub fn angles(&self, eps: f64) -> CliResult<AngleSet> {
        let d = self.dim()?;
        match (&self.omega, &self.angles) {
            (Some(o), None) => {
                if o.iter().any(|r| r.len() != d) {
                    return Err(CliError::validation("omega must be square"));
                }
                let m = DMatrix::from_fn(d, d, |i, j| o[i][j]);
                Ok(corr_to_angles_eps(&m, eps)?)
            }
            (None, Some(a)) => Ok(AngleSet::new(d, a.clone())?),
            _ => unreachable!("checked by dim"),
        }
    }

    pub fn alpha_matrix(&self) -> CliResult<DMatrix<f64>> {
        let d = self.dim()?;
        if self.alpha.is_empty() {
            return Ok(DMatrix::zeros(d, 0));
        }
        if self.alpha.len() != d {
            return Err(CliError::validation(format!("alpha has {} rows, expected d = {d}", self.alpha.len())));
        }
        let q = self.alpha[0].len();
        if self.alpha.iter().any(|r| r.len() != q) {
            return Err(CliError::validation("alpha rows differ in length"));
        }
        Ok(DMatrix::from_fn(d, q, |j, k| self.alpha[j][k]))
    }

    pub fn params(&self, eps: f64) -> CliResult<TrustParams> {
        let d = self.dim()?;
        let omega = match &self.omega {
            Some(o) => {
                if o.iter().any(|r| r.len() != d) {
                    return Err(CliError::validation("omega must be square"));
                }
                DMatrix::from_fn(d, d, |i, j| o[i][j])
            }
            None => trust_core::numkernel::angles_to_corr(&self.angles(eps)?, eps)?,
        };
        Ok(TrustParams::new(omega, self.alpha_matrix()?, self.nu.0)?)
    }

    pub fn loc_scale(&self) -> CliResult<Option<LocationScale>> {
        let d = self.dim()?;
        match (&self.mu, &self.s) {
            (None, None) => Ok(None),
            (mu, s) => {
                let mu = mu.clone().unwrap_or_else(|| vec![0.0; d]);
                let s = s.clone().unwrap_or_else(|| vec![1.0; d]);
                if mu.len() != d || s.len() != d {
                    return Err(CliError::validation("mu and s must have d entries"));
                }
                Ok(Some(LocationScale::new(mu, s)?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataScale {
    /// Raw data, turned into pseudo-observations by ranks.
    Raw,
    /// Values already on (0, 1).
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    /// Density of (z_i, z_j).
    Z,
    /// Copula density of (u_i, u_j).
    U,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// One-based margin indices.
    pub pair: [usize; 2],
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_grid_scale")]
    pub scale: GridScale,
    /// Values of the remaining coordinates, in index order, for a
    /// conditional slice; the bivariate margin is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<Vec<f64>>,
}

fn default_lo() -> f64 {
    -6.0
}
fn default_hi() -> f64 {
    6.0
}
fn default_points() -> usize {
    101
}
fn default_grid_scale() -> GridScale {
    GridScale::Z
}
fn default_kappa() -> f64 {
    0.05
}
fn default_kappas() -> Vec<f64> {
    vec![0.01, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
}
fn default_chains() -> usize {
    1
}
fn default_dependence_draws() -> usize {
    50
}
fn default_data_scale() -> DataScale {
    DataScale::Raw
}

/// Everything a command needs. Relative paths are taken relative to the
/// directory of the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub q: usize,
    /// Holds ν fixed; "inf" gives the skew-normal limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_nu: Option<Real>,
    /// Fits the distribution with μ = 0 and s = 1 held fixed.
    #[serde(default)]
    pub fix_loc_scale: bool,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Input CSV for fits, pseudo-obs and the held-out data of score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default = "default_data_scale")]
    pub data_scale: DataScale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Explicit parameter point (simulate, dependence, density-grid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamSpec>,
    /// A fit's summary JSON, whose point estimate is used instead of params.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// Second fitted model for score differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_summary: Option<PathBuf>,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub write_latents: bool,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    /// Stored draws used for posterior dependence summaries of copula fits.
    #[serde(default = "default_dependence_draws")]
    pub dependence_draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Adds wall-clock time to summaries, which makes them non-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads a configuration and makes its paths absolute.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data, &mut self.out, &mut self.summary, &mut self.compare_summary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Applies the command-line overrides; the seed ends up in both fields.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(s) = self.seed {
            self.mcmc.seed = s;
        }
        if out.is_some() {
            self.out = out;
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.mcmc.seed)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        let mut m = self.mcmc.clone();
        m.seed = self.seed();
        m.fix_nu = self.fix_nu.map(|r| r.0);
        m
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.q > 3 {
            return Err(CliError::validation(format!("q must be at most 3, got {}", self.q)));
        }
        if self.chains == 0 {
            return Err(CliError::validation("chains must be positive"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 0.5) || self.kappas.iter().any(|k| !(*k > 0.0 && *k <= 0.5)) {
            return Err(CliError::validation("every κ must lie in (0, 0.5]"));
        }
        self.prior.validate()?;
        let need = |v: bool, what: &str| if v { Ok(()) } else { Err(CliError::validation(format!("{:?} needs {what}", self.mode))) };
        match self.mode {
            Mode::Simulate => {
                need(self.params.is_some(), "\"params\"")?;
                need(self.n > 0, "n > 0")?;
            }
            Mode::FitDist | Mode::FitCopula => {
                need(self.data.is_some(), "\"data\"")?;
                self.mcmc_config().validate()?;
            }
            Mode::PseudoObs => need(self.data.is_some(), "\"data\"")?,
            Mode::Dependence => need(self.params.is_some() || self.summary.is_some(), "\"params\" or \"summary\"")?,
            Mode::Score => {
                need(self.data.is_some(), "\"data\" (the held-out rows)")?;
                need(self.summary.is_some(), "\"summary\"")?;
            }
            Mode::DensityGrid => {
                need(self.params.is_some() || self.summary.is_some(), "\"params\" or \"summary\"")?;
                need(self.grid.is_some(), "\"grid\"")?;
            }
        }
        Ok(())
    }
}
