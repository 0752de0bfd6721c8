use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value produced in {context}")]
    NonFinite { context: &'static str },
    #[error("vectors must have at least one entry")]
    Empty,
    #[error(
        "power iteration stalled after {iterations} iterations (last Rayleigh quotient {rayleigh})"
    )]
    NormEstimate { rayleigh: f64, iterations: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} has no gradient")]
    NotSmooth(&'static str),
    #[error(
        "normal equations are singular; the affine set is inconsistent or A is rank deficient"
    )]
    SingularNormalEquations,
    #[error("infimal postcomposition is not available for {0}")]
    UnsupportedPostcomposition(&'static str),
    #[error("{operation} is not available for {kind}")]
    Unsupported {
        operation: &'static str,
        kind: &'static str,
    },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("no norm bound available for {0}")]
    MissingNorm(String),
    #[error("iterates diverged at iteration {iter}")]
    Divergence { iter: usize },
    #[error("block {block}: {source}")]
    Block { block: usize, source: Box<Error> },
    #[error("custom function failed: {0}")]
    Custom(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("problem dimension {n} exceeds the desk-scale limit {max}")]
    TooLarge { n: usize, max: usize },
    #[error("{algorithm} cannot be applied: {reason}")]
    NotApplicable {
        algorithm: &'static str,
        reason: String,
    },
}

impl Error {
    pub(crate) fn in_block(self, block: usize) -> Error {
        Error::Block {
            block,
            source: Box::new(self),
        }
    }
}
