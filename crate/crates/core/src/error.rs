use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular basis: support nodes {0} and {1} coincide")]
    SingularBasis(usize, usize),
    #[error("inconsistent shared state between interval {interval} and {next}", next = interval + 1)]
    InconsistentSharedState { interval: usize },
    #[error("mesh nodes must be strictly increasing (violated at node {0})")]
    NonIncreasingNodes(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite derivative with respect to variable {0}")]
    NonFiniteDerivative(usize),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
