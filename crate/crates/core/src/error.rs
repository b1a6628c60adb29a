use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence {
        iterations: usize,
        last_estimate: f64,
        last_iterate: Vec<f64>,
    },

    #[error("rejection sampling exceeded {attempts} attempts; domain radius may be too small")]
    RejectionCap { attempts: usize },

    #[error("unsupported dimension {0}: only d = 1 and d = 2 are tabulated")]
    UnsupportedDimension(usize),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Layer { .. } | Error::InvalidArgument(_) => 2,
            Error::UnsupportedDimension(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
