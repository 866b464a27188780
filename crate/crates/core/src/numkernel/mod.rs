//! Numerical primitives: angle parameterization, univariate t functions,
//! multivariate normal/t distribution functions and random samplers.

pub mod angles;
pub mod lowdim;
pub mod mvcdf;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod univariate;

pub use angles::{angle_bounds, angles_to_cholesky, angles_to_corr, corr_to_angles, AngleSet, ANGLE_EPS};
pub use mvcdf::{mvn_cdf, mvn_cdf_with, mvt_cdf, mvt_cdf_with, QmcSettings};
pub use rng::RngStream;
pub use samplers::{sample_gamma, sample_trunc_normal_lower};
pub use univariate::{student_t_cdf, student_t_pdf, student_t_quantile};
