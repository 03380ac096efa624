use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e}, tolerance = {tolerance:e})")]
    Singular { lambda_min: f64, tolerance: f64 },

    #[error("{method} failed to converge after {iterations} iterations")]
    Convergence { method: &'static str, iterations: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("size limit exceeded: {what} = {value} exceeds the cap of {cap}{hint}")]
    Size {
        what: &'static str,
        value: u128,
        cap: u128,
        hint: &'static str,
    },

    #[error("invalid system: {field}: {reason}")]
    InvalidSystem { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::InvalidSystem { .. } => 2,
            Error::Config(_) | Error::Size { .. } | Error::Precondition(_) | Error::Dimension(_) => 3,
            Error::Singular { .. }
            | Error::Convergence { .. }
            | Error::NonFinite(_)
            | Error::Domain(_) => 4,
            Error::Csv(_) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
