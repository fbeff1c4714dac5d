use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported Bessel order {0}; closed forms exist for 1/2 and 3/2 only")]
    UnsupportedOrder(f64),

    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by the inputs rather than by the numerics.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::UnsupportedOrder(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
