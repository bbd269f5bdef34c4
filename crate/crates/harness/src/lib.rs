//! Experiment harness for the generative bootstrap: configuration, the
//! correlogram and coverage experiments, SVG charts and the `genboot` CLI.

pub mod chart;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod sampler;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_acf_experiment, run_coverage_experiment};
