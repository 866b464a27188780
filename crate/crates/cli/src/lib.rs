//! Command-line front end: JSON run configurations, CSV input and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod summary;

pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
