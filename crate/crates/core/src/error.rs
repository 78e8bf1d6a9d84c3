use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate energy range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Integration(#[from] crate::classical::integrator::IntegrateError),

    #[error("rejection sampling exhausted after {attempts} attempts")]
    Exhausted { attempts: u64 },

    #[error("Hilbert space dimension overflows for N={n}, L={l}")]
    DimensionOverflow { n: u32, l: usize },

    #[error("eigensolver failed to converge")]
    EigenConvergence,

    #[error("statistic undefined: {0}")]
    Undefined(&'static str),

    #[error("unknown selector: {0}")]
    UnknownSelector(String),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error("corrupt cache file {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("i/o error at {path}: {source}")]
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
}
