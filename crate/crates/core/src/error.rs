use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the localization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance lost positive definiteness (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("measurement update rejected: {0}")]
    UpdateRejected(String),

    #[error(
        "trilateration did not converge after {iterations} iterations (residual {residual:e} m)"
    )]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("degenerate beacon geometry: {0}")]
    DegenerateGeometry(String),

    #[error("event {index} is out of order: t={t} precedes t={previous}")]
    StreamOrder { index: usize, t: f64, previous: f64 },

    #[error("timestamp {t} outside reference span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("singular covariance block: {0}")]
    Consistency(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("log row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit status for the CLI: 2 for bad input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Config { .. }
            | Error::Parse { .. }
            | Error::StreamOrder { .. }
            | Error::DegenerateGeometry(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite, got {values:?}"
        )))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {value}")))
    }
}
