use thiserror::Error;

/// Errors raised by the testing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("every singular value of the nuisance matrix is below the rank tolerance")]
    AllZeroNuisance,

    #[error("penalty 0 requires a full-rank nuisance matrix with q < n (q = {q}, rank = {rank}, n = {n})")]
    SingularAtZero { n: usize, q: usize, rank: usize },

    #[error("invalid penalty {0}: must be finite and non-negative")]
    InvalidPenalty(f64),

    #[error("cross-validation folds are degenerate: {0}")]
    DegenerateFolds(String),

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("method needs low-dimensional nuisance (q = {q} must be < n = {n})")]
    NotLowDimensional { n: usize, q: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("unknown preset {0}")]
    UnknownPreset(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by a degenerate statistic rather than malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::ZeroVariance(_) | Error::AllZeroNuisance)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
