use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph contains a directed cycle")]
    CycleDetected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain of size {size} exceeds the enumeration cap {cap}")]
    DomainTooLarge { size: u128, cap: usize },

    #[error("variable {0} is not in scope")]
    UnknownVariable(usize),

    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("q must lie strictly inside (0, 1), got {0}")]
    DegenerateQ(f64),

    #[error("argument {0} outside the domain of the inequality")]
    OutOfDomain(f64),

    #[error("node {0} is already in the prefix")]
    NodeInPrefix(usize),

    #[error("trees are over different node sets ({0} vs {1} nodes)")]
    NodeSetMismatch(usize, usize),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("sample sets have incompatible shapes: {0}")]
    ShapeMismatch(String),

    #[error("{needed} subtests requested but the compute budget allows {budget}")]
    BudgetExceeded { needed: u128, budget: usize },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("reference mean q[{0}] is zero")]
    ZeroQ(usize),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
