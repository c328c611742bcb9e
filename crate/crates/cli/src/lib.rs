//! Experiment driver for the gap-shrinkage samplers: synthetic data, runners, reports
//! and SVG plots.

pub mod config;
pub mod error;
pub mod experiments;
pub mod generate;
pub mod plot;
pub mod report;
pub mod thresholds;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{CliError, Result};
pub use experiments::run_experiment;
pub use report::{Check, RunReport};
pub use thresholds::Thresholds;
