use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // graph construction
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("graph is disconnected: vertex {0} is not reachable from vertex 1")]
    Disconnected(usize),
    #[error("duplicate edge {0}~{1}")]
    DuplicateEdge(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge {0}~{1} has non-positive weight {2}")]
    NonPositiveWeight(usize, usize, f64),
    #[error("vertex label {0} out of range 1..={1}")]
    VertexOutOfRange(usize, usize),
    #[error("invalid pinning: {0}")]
    Pinning(String),
    #[error("vertex {0} does not belong to a ladder graph")]
    NotLadderVertex(usize),

    // numerics
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exponent {0} out of representable range")]
    Overflow(f64),
    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("the two vertices must differ (got {0} twice)")]
    SameVertex(usize),

    // enumeration / sampling
    #[error("enumeration guard exceeded: {0}")]
    EnumerationGuard(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sampler diagnostic: {0}")]
    Diagnostic(String),
    #[error("batch too short: {got} draws, need at least {need}")]
    BatchTooShort { got: usize, need: usize },
    #[error("batch carries no spanning trees; rerun with tree sampling enabled")]
    MissingTrees,
    #[error("identity check failed: {0}")]
    IdentityFailure(String),

    // input
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Overflow and factorization failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Singular
                | Error::NonFinite(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
