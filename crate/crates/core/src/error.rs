use std::io;

use thiserror::Error;

use crate::solver::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("compatibility violation: sum of right-hand side is {sum:e} (tolerance {tol:e})")]
    CompatibilityViolation { sum: f64, tol: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical failure in subdomain {subdomain:?}: {message}")]
    NumericalFailure {
        subdomain: Option<usize>,
        message: String,
    },

    #[error("constraint rank deficiency in subdomain {subdomain}: dependent rows {rows:?}")]
    ConstraintRank { subdomain: usize, rows: Vec<usize> },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("non-positive curvature {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("conjugate gradients did not converge in {} iterations", .0.iterations)]
    NonConvergence(Box<SolveReport>),

    #[error("problem size {size} exceeds dense limit {limit}; raise the limit or use a smaller grid")]
    TooLarge { size: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
