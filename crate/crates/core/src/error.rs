use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the model and fitting pipeline.
#[derive(Debug, Error)]
pub enum PlcError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The sampling grid cannot resolve a replacement wave.
    #[error("grid too coarse: dt = {dt} but the lifetime {lifetime} needs dt <= {max_dt}")]
    Resolution { dt: f64, lifetime: f64, max_dt: f64 },

    #[error("series are not aligned: {0}")]
    Alignment(String),

    #[error("step size rejected: {0}")]
    StepSize(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("no feasible candidate: {0}")]
    Infeasible(String),

    #[error("insufficient horizon: {0}")]
    Horizon(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PlcError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        PlcError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PlcError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PlcError>;

/// Rejects NaN/inf and values that fail `ok`.
pub(crate) fn check(name: &'static str, value: f64, ok: bool, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(PlcError::param(
            name,
            format!("must be finite, got {value}"),
        ));
    }
    if !ok {
        return Err(PlcError::param(name, format!("{what}, got {value}")));
    }
    Ok(())
}
