//! Benchmark harness for the `prospect-core` optimizers: JSON experiment
//! configs, a shared reference solve, parallel `(optimizer, seed)` sweeps and
//! CSV/SVG output.

pub mod config;
mod error;
pub mod metrics;
pub mod parity;
pub mod runner;

pub use config::{ExperimentConfig, OptimizerKind, OptimizerSpec};
pub use error::{CliError, Result};
pub use metrics::{read_metrics, write_metrics, MetricsRecord};
pub use parity::statistical_parity_gap;
pub use runner::{run_experiment, write_outputs, ExperimentOutput};
