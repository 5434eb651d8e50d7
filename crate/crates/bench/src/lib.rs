//! Experiment runner for the `mfvi-core` engines: configuration, data and
//! fit files, deterministic CSV reports, and the command-line interface.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod report;

pub use config::{ExperimentConfig, InitPolicy, Method, ModelSpec};
pub use error::{BenchError, Result};
