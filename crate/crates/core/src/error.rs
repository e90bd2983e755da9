use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid SBM spec: {0}")]
    InvalidSpec(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("adjacency is not symmetric: edge ({0}, {1}) has no reverse")]
    AsymmetricAdjacency(usize, usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error category, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSpec(_) => ErrorKind::Config,
            Error::NonFinite(_) | Error::NoConvergence { .. } | Error::NotSymmetric(_) => {
                ErrorKind::Numerical
            }
            Error::Parse { .. }
            | Error::ShapeMismatch(_)
            | Error::AsymmetricAdjacency(..)
            | Error::InvalidDataset(_)
            | Error::Empty(_)
            | Error::Io { .. } => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
