use thiserror::Error;

/// Errors produced by simulation, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// The empirical centered second moment is not positive, so `a_hat` is undefined.
    /// `b_hat` is still meaningful and is carried along.
    #[error("degenerate empirical variance (alpha_T = {alpha}); b_hat = {b_hat}")]
    DegenerateVariance { alpha: f64, b_hat: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no distribution target available: {0}")]
    UnsupportedDistributionTarget(String),

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Configuration(_) | Error::Format { .. } => 1,
            Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::DegenerateVariance { .. }
            | Error::Numerical(_)
            | Error::UnsupportedDistributionTarget(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
