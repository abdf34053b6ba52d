use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{name}`; valid systems are: {valid}")]
    UnknownSystem { name: String, valid: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("invalid Savitzky-Golay window {window} for order {order} and {len} samples")]
    InvalidWindow {
        window: usize,
        order: usize,
        len: usize,
    },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("support is empty")]
    EmptySupport,

    #[error("coordinate descent did not converge within {sweeps} sweeps (last change {last_change:.3e})")]
    NonConvergence { sweeps: usize, last_change: f64 },

    #[error("{diverged} of {total} post-warmup HMC trajectories diverged")]
    DivergenceRate { diverged: usize, total: usize },

    #[error("posterior is improper: {0}")]
    DegeneratePosterior(String),

    #[error("need at least {needed} posterior draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("matrix is singular or too ill-conditioned (condition estimate {condition:.3e})")]
    SingularMatrix { condition: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
