use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-deterministic model function: two evaluations at identical parameters differ ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (loss {loss}); parameter norms: {norms}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        norms: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input (configs, files, manifests)
    /// rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Contract(_)
                | Error::Format { .. }
                | Error::Manifest { .. }
                | Error::Json(_)
                | Error::Dimension { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
