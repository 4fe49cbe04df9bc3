use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A cell holds NaN or an infinite value.
    #[error("missing value at ({row},{col})")]
    MissingValue { row: usize, col: usize },

    /// Dates must be strictly increasing.
    #[error("dates not increasing at row {row}")]
    DatesNotIncreasing { row: usize },

    /// Not a valid `YYYY-MM-DD` calendar date.
    #[error("invalid date: {0}")]
    InvalidDate(String),

    #[error("empty panel: {0}")]
    EmptyPanel(&'static str),

    /// A column with zero variance cannot be standardized.
    #[error("zero-variance column for ticker {ticker}")]
    ZeroVariance { ticker: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Spectral split left no eigenvalue above the noise edge.
    #[error("no factor exceeds MP edge {lambda_plus}")]
    NoFactorAboveEdge { lambda_plus: f64 },

    /// The computation degenerated (zero variance, all-equal tail, ...).
    #[error("degenerate computation: {0}")]
    Degenerate(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at iteration {iteration}: generator {g_loss}, discriminator {d_loss}")]
    NonFiniteLoss { iteration: usize, g_loss: f64, d_loss: f64 },

    /// Linear algebra failure (singular or indefinite matrix).
    #[error("linear algebra failure: {0}")]
    Linalg(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
