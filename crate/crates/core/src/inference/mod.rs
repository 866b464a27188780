//! Bayesian estimation by data augmentation.

pub mod config;
pub mod dic;
pub mod distribution;
pub mod gibbs;
pub mod likelihood;
pub mod sampler;
pub mod theta;

pub use config::{McmcConfig, PriorConfig};
pub use dic::{dic, dic_with, posterior_mean, DicResult, PointEstimate};
pub use distribution::{log_likelihood, run_mcmc, run_mcmc_standardized, step3_update_theta, validate_data, DistributionTarget};
pub use gibbs::{step1_sample_l, step2_rates, step2_sample_w, step2_shape};
pub use likelihood::{log_extended_likelihood, log_prior, LatentState};
pub use sampler::{step3_sweep, AdaptState, AugmentedTarget, ChainState, ModelKind, PosteriorDraws};
pub use theta::{Component, Theta};
