//! Experiment tooling around `qfl-core`: MNIST IDX loading, configuration,
//! output formats and the `run` / `sweep` drivers behind the `qfl` binary.

pub mod circuit_file;
pub mod config;
pub mod error;
pub mod executor;
pub mod experiment;
pub mod idx;
pub mod mnist;
pub mod params_file;
pub mod telemetry;

pub use config::{FedConfig, OptimizerName, TaskName};
pub use error::{CliError, Result};
