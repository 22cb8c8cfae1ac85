use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqmError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("trace must be 1 (got {0})")]
    BadTrace(f64),

    #[error("operator is not a projector (idempotence error {0:e})")]
    NotProjector(f64),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("projectors in a product do not commute (commutator norm {0:e})")]
    NonCommuting(f64),

    #[error("negative measure {0:e} for perception {1:?}")]
    NegativeMeasure(f64, String),

    #[error("family has no entries")]
    EmptyFamily,

    #[error("duplicate perception label {0:?}")]
    DuplicateLabel(String),

    #[error("total measure is zero or not finite ({0})")]
    ZeroMeasure(f64),

    #[error("conditioning set has zero measure")]
    UndefinedCondition,

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid rank partition {ranks:?} of dimension {dim}")]
    InvalidPartition { dim: usize, ranks: Vec<usize> },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("all likelihoods are zero; posterior undefined")]
    NoUpdate,

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("point is not in the restricting set")]
    NotInSet,

    #[error("observation p = 0 gives a degenerate posterior")]
    DegenerateObservation,

    #[error("a state is required to realize this experience operator")]
    StateRequired,

    #[error("zero-measure perception has no relative state")]
    ZeroNorm,

    #[error("too many histories to enumerate ({0})")]
    TooLarge(usize),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, SqmError>;
