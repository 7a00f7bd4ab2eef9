//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A mode shape with zero observable part cannot be normalized.
    #[error("unobservable mode: the observable part B*v has zero norm")]
    UnobservableMode,

    /// Modal identification failed (too few peaks, or the oscillator fit
    /// did not converge). The message carries the diagnostic detail.
    #[error("modal identification failed: {0}")]
    Identification(String),

    #[error("ensemble member {0} diverged to a non-finite state")]
    DivergedMember(usize),

    #[error("degenerate ensemble: observation anomalies have rank zero but the innovation is nonzero")]
    DegenerateEnsemble,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl BeamError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        BeamError::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        BeamError::Numerical(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        BeamError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 numerical, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            BeamError::InvalidArgument(_)
            | BeamError::DimensionMismatch { .. }
            | BeamError::Parse { .. } => 1,
            BeamError::UnobservableMode
            | BeamError::Identification(_)
            | BeamError::DivergedMember(_)
            | BeamError::DegenerateEnsemble
            | BeamError::Numerical(_) => 2,
            BeamError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, BeamError>;
