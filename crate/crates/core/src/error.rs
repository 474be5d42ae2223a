use thiserror::Error;

/// Errors produced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    /// A scale matrix failed its Cholesky factorization. `mode` is 0-based.
    #[error("scale matrix for mode {mode} is not positive definite")]
    NotPositiveDefinite { mode: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPd(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("moment of order {order} does not exist for {family}")]
    MomentDoesNotExist { order: u8, family: String },

    #[error("{0} is not available in closed form for this generator family")]
    NotClosedForm(String),

    #[error("h(d) = d^(nm/2) g(d) has no finite maximum for {0}")]
    NoFiniteMaximum(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("input is not of unit norm (norm = {0})")]
    NonUnitNorm(f64),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("class error: {0}")]
    Class(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Returns true for failures that originate in the numerics (non-PD
    /// matrices, degenerate fits, quadrature failure) rather than in the
    /// caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NotPd(_)
                | Error::NoFiniteMaximum(_)
                | Error::Quadrature(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
