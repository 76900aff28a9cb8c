use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky of `K + σ²I` failed even with the largest jitter.
    #[error("ill-conditioned kernel matrix (condition estimate {condition_estimate:.3e}, jitter {jitter:.3e})")]
    IllConditioned { condition_estimate: f64, jitter: f64 },

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("singular mass matrix at t = {time} s")]
    SingularConfiguration { time: f64 },

    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("config fingerprint mismatch: file has {found}, expected {expected}")]
    FingerprintMismatch { found: String, expected: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
