//! Result rows and their CSV encoding.
//!
//! Columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `run_id` | first 12 hex digits of `config_hash` |
//! | `model` | model kind |
//! | `hidden` | hidden units (0 for `logistic_only`) |
//! | `lambda` | regularization strength (0 when no penalty) |
//! | `activation` | hidden activation |
//! | `seed` | experiment seed |
//! | `epoch` | 0-based epoch; on `final` rows the epoch of the evaluated model |
//! | `train_loss`, `val_loss` | objective values for that epoch |
//! | `sparsity` | mean fraction of units at or below tau on validation data |
//! | `mean_activation` | grand mean hidden activation on validation data |
//! | `probe_accuracy` | held-out accuracy of the probe (of the classifier for `mlp`) |
//! | `wall_time_seconds` | run wall time |
//! | `status` | `epoch`, `final` or `failed` |
//! | `message` | failure diagnostic, else empty |
//! | `config_hash` | SHA-256 of the run config |
//! | `version` | library version |
//!
//! Missing and NaN values are written as empty cells. Floats are written in
//! plain decimal notation with the fewest digits that parse back to the
//! same value (`0.00001`, `0.1`, `1.0`).

use std::fs::OpenOptions;
use std::path::Path;

use ovr_core::network::Activation;
use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Epoch,
    Final,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub model: ModelKind,
    pub hidden: usize,
    pub lambda: f64,
    pub activation: Activation,
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub sparsity: Option<f64>,
    pub mean_activation: Option<f64>,
    pub probe_accuracy: Option<f64>,
    pub wall_time_seconds: f64,
    pub status: RunStatus,
    pub message: String,
    pub config_hash: String,
    pub version: String,
}

/// `None` for NaN so that the cell is written empty.
pub fn finite(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub const CSV_HEADER: &str = "run_id,model,hidden,lambda,activation,seed,epoch,train_loss,val_loss,sparsity,mean_activation,probe_accuracy,wall_time_seconds,status,message,config_hash,version";

/// Writes `records` with a header, replacing any existing file.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(|e| CliError::csv(path, e))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Appends `records`, writing the header only when the file is new or empty.
pub fn append_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    if fresh {
        return write_records(path, records);
    }
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for r in records {
        w.serialize(r).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::csv(path, e)))
        .collect()
}
