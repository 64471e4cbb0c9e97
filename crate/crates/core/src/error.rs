use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum OvrError {
    #[error("invalid sphere spec: {0}")]
    InvalidSpec(String),
    #[error("invalid point: norm {norm} is not within 1e-6 of 1")]
    InvalidPoint { norm: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    Numeric(String),
    #[error("label {label} out of range for {class_count} classes")]
    InvalidLabel { label: usize, class_count: usize },
    #[error("training diverged at epoch {epoch} (lambda = {lambda:e}): {detail}")]
    Divergence {
        epoch: usize,
        lambda: f64,
        detail: String,
    },
    #[error("format error in {}{}: {message}", file.display(), record.map(|r| format!(" (record {r})")).unwrap_or_default())]
    Format {
        file: PathBuf,
        record: Option<usize>,
        message: String,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, OvrError>;

impl OvrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OvrError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_shape(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(OvrError::Shape(msg()))
    }
}
