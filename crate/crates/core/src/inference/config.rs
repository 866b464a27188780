use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::numkernel::angles::ANGLE_EPS;

/// Prior hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Angles are uniform on (ε, π − ε), or (ε, 2π − ε) on the subdiagonal.
    pub eps: f64,
    /// α_jk ~ N(0, alpha_variance).
    pub alpha_variance: f64,
    /// (ν − nu_shift) ~ Gamma(nu_shape, nu_rate).
    pub nu_shift: f64,
    pub nu_shape: f64,
    pub nu_rate: f64,
    /// p(μ, s) ∝ Π 1/s_j when set, flat otherwise.
    pub reference_loc_scale: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            eps: ANGLE_EPS,
            alpha_variance: 25.0,
            nu_shift: 2.0,
            nu_shape: 3.0,
            nu_rate: 0.2,
            reference_loc_scale: true,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps, self.alpha_variance, self.nu_shape, self.nu_rate];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.eps >= 0.5 {
            return Err(TrustError::validation("prior hyperparameters must be positive (and ε < 0.5)"));
        }
        if !(self.nu_shift.is_finite() && self.nu_shift >= 2.0) {
            return Err(TrustError::validation("the ν shift must be at least 2"));
        }
        Ok(())
    }
}

/// Chain lengths, adaptation and the optional fixed ν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Robbins–Monro target for every scalar component.
    pub target_acceptance: f64,
    /// Sweeps over which the adaptation gain halves roughly.
    pub adapt_window: usize,
    /// Holds ν fixed (infinity gives the skew-normal limit).
    #[serde(skip)]
    pub fix_nu: Option<f64>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_burn: 10_000,
            n_keep: 10_000,
            thin: 1,
            seed: 1,
            target_acceptance: 0.44,
            adapt_window: 100,
            fix_nu: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn == 0 || self.n_keep == 0 || self.thin == 0 {
            return Err(TrustError::validation("n_burn, n_keep and thin must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(TrustError::validation("target acceptance must lie in (0, 1)"));
        }
        if self.adapt_window == 0 {
            return Err(TrustError::validation("adapt_window must be positive"));
        }
        if let Some(nu) = self.fix_nu {
            if !(nu > 2.0) {
                return Err(TrustError::validation(format!("fixed ν must exceed 2, got {nu}")));
            }
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.n_burn + self.n_keep * self.thin
    }
}
