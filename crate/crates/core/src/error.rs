use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point-location query fell outside the partition's domain.
    #[error("point {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    /// A prediction distribution failed validation.
    #[error("invalid distribution: {0}")]
    Distribution(String),

    /// The stationary-distribution solver missed the residual target.
    #[error("stationary distribution did not converge (residual {residual:e})")]
    Convergence { residual: f64 },

    /// A configuration file or block is malformed.
    #[error("config error ({field}): {message}")]
    Config { field: String, message: String },

    /// A forecaster broke its round contract at runtime.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI: config errors exit 1, runtime
    /// contract violations exit 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
