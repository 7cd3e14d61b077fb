use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("group mismatch: expected {expected}, got {got}")]
    GroupMismatch { expected: String, got: String },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("no closed-form coupling matrix for custom topologies; use the linear solve")]
    NoClosedForm,

    #[error("singular linear system while computing the coupling matrix")]
    Singular,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("map descriptor {descriptor} is not valid for group {group}")]
    Descriptor { descriptor: String, group: String },

    #[error("midpoint iteration did not converge in {iters} iterations (residual {residual:e}); step size too large?")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("integration failed in trajectory {trajectory} at output step {step}: {source}")]
    Trajectory {
        trajectory: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value {context}")]
    NonFinite { context: String },

    #[error("cannot estimate convergence order from a zero error")]
    ZeroError,

    #[error("{0}")]
    Oracle(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
