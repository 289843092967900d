use thiserror::Error;

/// Errors produced by the `kchol` library.
///
/// Numerical breakdown inside the incomplete factorization is not an error:
/// failed pivots are recorded on the factor instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point cloud must contain at least one point")]
    EmptyCloud,

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-finite coordinate at point {point}, axis {axis}")]
    NonFinite { point: usize, axis: usize },

    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("invalid boundary policy: {0}")]
    Boundary(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem size {n} exceeds the oracle cap of {cap}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("column {0} has no stored diagonal entry")]
    MissingDiagonal(usize),

    #[error("nonpositive pivot {value} in column {column}")]
    NonPositivePivot { column: usize, value: f64 },

    #[error("factor is rank deficient: {zeroed} zeroed column(s)")]
    RankDeficient { zeroed: usize },

    #[error("no sample points lie in the interior region")]
    NoInteriorPoints,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
