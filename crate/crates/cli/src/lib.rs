//! Experiment drivers for `helmsweep`: configuration, sweeps, surrogate
//! construction, validation and CSV reports.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod validate;

pub use config::{ExperimentConfig, Method, Overrides};
pub use error::CliError;
pub use experiment::{compute_experiment, run_experiment, ExperimentResults, Surrogate};
