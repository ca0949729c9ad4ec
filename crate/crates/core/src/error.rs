use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by every pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: {0}")]
    Schema(String),

    /// A single row of an input dataset could not be used.
    #[error("record `{source_id}`: {reason}")]
    Record { source_id: String, reason: String },

    /// A configuration field failed validation.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("state error: {0}")]
    State(String),

    #[error("backend error: {0}")]
    Backend(String),

    /// A long-running job stopped; everything up to `last_step` is persisted.
    #[error("job failed after step {last_step}: {source}")]
    Job {
        last_step: u64,
        #[source]
        source: Box<Error>,
    },

    /// Generation stopped at a task; earlier tasks are in the manifest.
    #[error("generation task {task_index} ({class_name}, seed {seed}) failed: {source}")]
    Generation {
        task_index: usize,
        class_name: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Parquet(#[from] parquet::errors::ParquetError),

    #[error(transparent)]
    Arrow(#[from] arrow::error::ArrowError),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attach a path to `std::io` results.
pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
