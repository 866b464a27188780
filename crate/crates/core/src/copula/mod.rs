//! The implicit copula of the TrUST distribution.

pub mod data;
pub mod density;
pub mod dependence;
pub mod fit;

pub use data::{pseudo_observations, CopulaData};
pub use density::{copula_log_density, copula_log_density_rows, copula_scores, CopulaParams};
pub use dependence::{
    asymmetry_measures, bivariate_copula_cdf, bivariate_copula_cdf_with, dependence_report, kendall, kendall_with, quantile_dependence, quantile_dependence_with, spearman,
    spearman_with, DependenceReport, Estimate, PairDependence, QuadrantDependence,
};
pub use fit::{
    copula_dic, copula_log_likelihood, fit_copula_mcmc, log_score, pair_posterior, CopulaTarget, LogScore,
    PairPosterior, PosteriorSummary,
};
