use thiserror::Error;

use crate::process::ErgodicityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("model is not ergodic: {0}")]
    NotErgodic(ErgodicityReport),

    #[error("model violates regime conditions: {0}")]
    Regime(String),

    #[error("required moment is infinite: {0}")]
    InfiniteMoment(String),

    #[error("quadrature did not converge: {message}")]
    Quadrature {
        message: String,
        partial: Box<ErgodicityReport>,
    },

    #[error("insufficient data: got {got}, need {need} ({what})")]
    InsufficientData {
        what: &'static str,
        got: usize,
        need: usize,
    },

    #[error("stationary mass beyond state cap {cap} is {deficit:e}, above tolerance {tol:e}; increase the cap")]
    MassDeficit { cap: usize, deficit: f64, tol: f64 },

    #[error("estimate is degenerate: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// failures that surface while an experiment runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Domain(_)
            | Error::NotErgodic(_)
            | Error::Regime(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
