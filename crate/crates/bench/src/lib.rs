//! Experiment harness for random function descent: configuration, test
//! losses, CSV output and parallel multi-seed runs.

pub mod config;
pub mod csv_io;
pub mod experiment;
pub mod similarity;
pub mod toy;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, BenchError, ExperimentReport, RunResult};
