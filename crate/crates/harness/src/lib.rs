//! Experiment harness around `steepest-core`: teacher-student and IDX data,
//! run configuration, the training loop with per-step diagnostics, CSV/SVG
//! output, checkpoints and parameter sweeps.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod idx;
pub mod output;
pub mod sweep;
pub mod teacher;
pub mod training;

pub use config::{ConfigFile, DataSource, ModelKind, RunConfig};
pub use error::{HarnessError, Result};
pub use training::{evaluate_accuracy, run_training, train, Row, RunLog};
