//! The TrUST distribution: parameters, densities, margins and sampling.

pub mod density;
pub mod marginal;
pub mod params;
pub mod sample;

pub use density::{
    log_pdf_conditional, log_pdf_extended, log_pdf_joint, log_pdf_joint_factorized, log_pdf_location_scale,
    log_pdf_marginal, log_pdf_marginal_block, ExtendedShift, LocationScale, Partition,
};
pub use marginal::{marginal_cdf, marginal_quantile, MarginalTable};
pub use params::{alpha_from_delta, delta_from_alpha, h_diag, identify, identifying_order, sigma_from_delta, TrustParams};
pub use sample::{sample, Sample};
