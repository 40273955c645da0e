use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("n = {n} exceeds the enumeration cap of {cap}")]
    Size { n: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A diagonal entry of the D matrix vanishes for sets of this size.
    #[error("singular D matrix: denominator vanishes for |S| = {size}")]
    Singularity { size: usize },

    #[error("linear system is inconsistent")]
    Inconsistent,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, DcError>;
