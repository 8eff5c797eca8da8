use thiserror::Error;

use crate::fitting::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Measured rate too high for the dead-time inversion (`r * tau >= 1`).
    #[error("detector saturated: measured rate {rate:.6e} s^-1 with dead time {dead_time:.3e} s")]
    Saturation { rate: f64, dead_time: f64 },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("fit did not converge after {} iterations", trace.len())]
    NonConvergence { trace: Vec<IterationRecord> },

    #[error(
        "rank-deficient normal equations (parameter `{parameter}` is unconstrained by the data)"
    )]
    RankDeficient { parameter: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::NonConvergence { .. } | Error::RankDeficient { .. } => 4,
            _ => 3,
        }
    }
}

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

pub(crate) fn ensure_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and >= 0, got {value}"
        )))
    }
}
