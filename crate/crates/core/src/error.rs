use thiserror::Error;

use crate::exprlang::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("Assumption II unverifiable: C_dot*(1+gamma) <= 1 not reached within horizon {horizon} (gamma = {gamma})")]
    AssumptionIIUnverifiable { gamma: f64, horizon: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undetermined: {0}")]
    Undetermined(String),

    #[error("inner quadrature of F did not converge on [0, {upper}]")]
    QuadratureNonConvergence { upper: f64 },

    #[error("Picard iteration did not converge at step {step} (t = {time})")]
    PicardNonConvergence { step: usize, time: f64 },

    #[error("non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("incompatible initial data: {0}")]
    IncompatibleInitialData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("comparison solution blows up at t = {time}")]
    ComparisonBlowUp { time: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
