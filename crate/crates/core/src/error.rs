use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {smallest:e}, largest {largest:e})")]
    NotPositiveDefinite { smallest: f64, largest: f64 },

    #[error("unsupported dimension {0} (expected 2..=8)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must be nonzero")]
    ZeroVector,

    #[error("derivative is singular at a point with a zero coordinate (q = {q})")]
    SingularGradient { q: f64 },

    #[error("need at least {needed} sample points, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("point lies outside the field's domain")]
    OutOfDomain,

    #[error("degenerate gradient (H(grad u) = {norm:e}) with p = {p} < 2")]
    DegenerateGradient { norm: f64, p: f64 },

    #[error("polynomial is not harmonic")]
    NotHarmonic,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("operation requires a quadratic norm")]
    UnsupportedNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
}
