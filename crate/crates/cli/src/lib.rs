//! Experiment orchestration on top of [`ovr_core`].
//!
//! - [`config`]: TOML experiment files and sweep grids.
//! - [`record`]: the CSV result schema.
//! - [`runner`]: trains one configured model and evaluates its representation.
//! - [`sweep`]: grids of runs, parallel workers, resumable output.
//! - [`features`]: weight rows rendered as CIFAR-shaped image tiles.
//! - [`plot`]: SVG line plots of CSV columns.

pub mod config;
pub mod error;
pub mod features;
pub mod plot;
pub mod record;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, ModelKind};
pub use error::{CliError, Result};
pub use record::{read_records, write_records, RunRecord, RunStatus};
pub use runner::run_experiment;
pub use sweep::{sweep, SweepOptions};
