use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("non-invertible readout channel on qubit {qubit}: p0 + p1 = {sum}")]
    NonInvertibleChannel { qubit: usize, sum: f64 },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("invalid confusion matrix: {0}")]
    InvalidConfusion(String),

    #[error("histogram has no shots")]
    EmptyHistogram,

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("mitigation failed for state {state_index} at {shots} shots: {source}")]
    Task {
        state_index: usize,
        shots: u64,
        #[source]
        source: Box<Error>,
    },
}
