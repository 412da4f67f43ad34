//! Sparsity sweeps, artifact writers and dataset files for the `rvscgd` CLI.

pub mod config;
pub mod dataset_io;
mod error;
pub mod experiment;
pub mod plot;
pub mod teacher;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{run_experiment, run_sweep, Manifest};
