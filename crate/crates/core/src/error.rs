use thiserror::Error;

/// Failure conditions shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NonPd(String),
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("rank mismatch: rank {0} vs rank {1}")]
    RankMismatch(usize, usize),
    #[error("column spaces differ (projection residual {0:e})")]
    RangeMismatch(f64),
    #[error("too few rows: n = {n}, need at least {needed}")]
    TooFewRows { n: usize, needed: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("scatter matrix is singular (n = {n}, p = {p})")]
    SingularScatter { n: usize, p: usize },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("group element is singular")]
    SingularG,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
