use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate measure: total mass is zero")]
    DegenerateMeasure,

    /// A model, policy or document failed validation. `path` names the
    /// offending field, e.g. `kernel[3].absorb`.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    /// The model is not (certifiably) uniformly absorbing.
    #[error("not certified: {0}")]
    NotCertified(String),

    /// A weighted-norm transform condition failed at a (cell, action) pair.
    #[error("weight condition violated at cell {cell}, action {action}: ratio {ratio} exceeds {bound}")]
    WeightCondition {
        cell: usize,
        action: usize,
        ratio: f64,
        bound: f64,
    },

    #[error("tolerance error: {0}")]
    Tolerance(String),

    /// A construction finished but could not reach the requested accuracy.
    #[error("certified failure: achieved error {achieved:e} exceeds tolerance {tol:e} ({context})")]
    CertifiedFailure {
        achieved: f64,
        tol: f64,
        context: String,
    },

    #[error("target is outside the performance set (separation {separation:e})")]
    Infeasible { separation: f64 },

    #[error("target lies in the resolution gap (lower bound {lower:e}, upper bound {upper:e})")]
    Undecidable { lower: f64, upper: f64 },

    #[error("not a point of the performance set: distance {0:e}")]
    NotInSet(f64),

    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),

    #[error("too large: {0}")]
    TooLarge(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
