//! Tractable unified skew-t (TrUST) distribution and its implicit copula.

pub mod copula;
pub mod error;
pub mod inference;
pub mod numkernel;
pub mod trust;

pub use error::{Result, TrustError};
pub use trust::{LocationScale, TrustParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use nalgebra::{DMatrix, DVector};
