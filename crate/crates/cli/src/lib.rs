//! Command-line workflows around `hpp-core`: configuration files, CSV
//! input, posterior fits, prior comparisons and reproducible outputs.

pub mod commands;
pub mod compare;
pub mod config;
pub mod error;
pub mod fit;
pub mod manifest;
pub mod output;
pub mod table;

pub use error::{CliError, CliResult};
