//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point coordinate fell outside the unit hypercube.
    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    Domain { index: usize, value: f64 },

    /// A structural argument (count, order, probability, length) was invalid.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A value violated a type invariant; `path` names the offending field.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    /// The analytic gradient of the smoothing window is unbounded at this point.
    #[error("gradient is singular at a cell boundary of variable {var} (exponent {exponent} < 1)")]
    Singular { var: usize, exponent: f64 },

    /// A request would exceed a fixed resource limit (grid points, cells).
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The function has zero variance so variance ratios are undefined.
    #[error("degenerate function: {0}")]
    Degenerate(String),

    /// A calibration target referred to a term with no measurable variance.
    #[error("cannot calibrate term {term}: estimated variance is {variance}")]
    Calibration { term: usize, variance: f64 },

    /// Spec document could not be read.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
