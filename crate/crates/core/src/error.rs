//! Crate-wide error type.

/// Errors raised by basis construction, optical transforms, and retrieval.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("mode count and photon number must both be at least 1")]
    EmptyBasis,

    #[error("basis dimension {dim} exceeds the supported limit {limit}")]
    BasisTooLarge { dim: u128, limit: u128 },

    #[error("configuration {0:?} does not belong to this basis")]
    ConfigNotInBasis(Vec<u32>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state norm deviates from 1 by {0:.3e}")]
    NotNormalized(f64),

    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not square")]
    NotSquare,

    #[error("permanent of a {0}x{0} matrix is beyond the exact-algorithm limit")]
    PermanentTooLarge(usize),

    #[error("phase vector must start with 0 (gauge convention), got {0}")]
    GaugeViolation(f64),

    #[error("value must be finite")]
    NonFinite,

    #[error("input and output configurations carry different photon numbers")]
    PhotonNumberMismatch,

    #[error("probabilities must be nonnegative and sum to 1 (sum deviates by {0:.3e})")]
    InvalidDistribution(f64),

    #[error("classical field must not be identically zero")]
    ZeroField,

    #[error("invalid phase extractor: {0}")]
    InvalidExtractor(String),

    #[error("extractor does not match the state: {0}")]
    ExtractorMismatch(String),

    #[error("state construction failed validation: {0}")]
    InvalidState(String),

    #[error("photon budget {budget} is below the event size {event}")]
    BudgetTooSmall { budget: u64, event: u64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
