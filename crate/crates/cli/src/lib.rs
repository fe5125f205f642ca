//! Experiment driver for `nlkw-core`: configuration, pipeline orchestration
//! and result files.

pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod svg;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use error::{RunError, Stage};
pub use pipeline::{run_pipeline, sweep_rho, RunSummary, SweepSummary};
