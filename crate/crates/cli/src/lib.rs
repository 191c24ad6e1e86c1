//! Experiment driver: configuration, artifact formats and the command
//! implementations behind the `pinnlab` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
