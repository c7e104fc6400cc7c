use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by kernel evaluation, operator assembly and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluation failed at ({x}, {t}): {reason}")]
    KernelEval {
        x: String,
        t: String,
        reason: String,
    },

    #[error("invalid kernel spec field `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("kernel is not Hermitian: max deviation {max_deviation:e} exceeds {tol:e}")]
    NotHermitian { max_deviation: f64, tol: f64 },

    #[error("invalid atom space: {0}")]
    InvalidSpace(String),

    #[error("unknown atom id `{0}`")]
    UnknownAtom(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty support: every atom has zero measure")]
    EmptySupport,

    #[error(
        "eigensolver did not converge on a {size}x{size} matrix within {max_iterations} iterations"
    )]
    EigenNoConvergence { size: usize, max_iterations: usize },

    #[error(
        "eigenvalue index {index} is below rank cutoff (sigma = {sigma:e}, cutoff = {cutoff:e})"
    )]
    BelowRankCutoff {
        index: usize,
        sigma: f64,
        cutoff: f64,
    },

    #[error("element not representable in spectral basis: atom `{0}` is off the support")]
    OffSupport(String),

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: {source}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
