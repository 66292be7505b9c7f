use thiserror::Error;

/// Library-wide error type. `Parameter` maps to CLI exit code 2,
/// the numeric variants map to exit code 3.
#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved relative error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureFailure { achieved: f64, requested: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BarrierError>;

impl BarrierError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        BarrierError::Parameter(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        BarrierError::Domain(msg.into())
    }

    /// CLI exit code convention: 0 success, 2 parameter error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BarrierError::Parameter(_) | BarrierError::Domain(_) => 2,
            _ => 3,
        }
    }
}
