//! Experiment runner for `spherelab-core`: TOML configs, learning-rate
//! sweeps written as CSV, post-processing and the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod config;
mod error;
pub mod format;
pub mod runner;

pub use analyze::{analyze, AnalysisOverrides, AnalysisReport};
pub use config::{ExperimentConfig, ModelSpec};
pub use error::{LabError, Result};
pub use runner::{run_baseline, run_grid, GridOutput};
