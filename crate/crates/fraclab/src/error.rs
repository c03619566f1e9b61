use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite argument")]
    NonFinite,
    #[error("range error: exponent {exponent} overflows double precision")]
    Overflow { exponent: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quadrature did not converge: coarse {coarse}, refined {fine}")]
    Quadrature { coarse: f64, fine: f64 },
    #[error("form is not coercive: gamma estimate {0}")]
    NotCoercive(f64),
    #[error("singular matrix")]
    Singular,
    #[error("no contraction: q = {q} at delta = {delta}")]
    NoContraction { q: f64, delta: f64 },
    #[error("iteration stalled after {iterations} steps, last increment {increment}")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("divergent: {0}")]
    Divergent(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
