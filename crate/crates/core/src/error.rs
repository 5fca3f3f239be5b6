use thiserror::Error;

/// Validation failures raised while building a [`crate::netgraph::Network`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    DanglingEndpoint { edge: String, vertex: String },
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("edge `{edge}` has non-positive length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("boundary vertex `{vertex}` has degree {degree}, expected 1")]
    BoundaryDegree { vertex: String, degree: usize },
    #[error("interior vertex `{0}` is a dead end (degree 1); pass allow_dead_ends to accept it")]
    DeadEnd(String),
    #[error("vertex `{0}` has no adjacent edges")]
    IsolatedVertex(String),
    #[error("network is disconnected")]
    Disconnected,
    #[error("network has no boundary vertex")]
    NoBoundary,
    #[error("invalid boundary ramp at `{vertex}`: {reason}")]
    InvalidRamp { vertex: String, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid damping model: {0}")]
    InvalidDamping(String),
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("space violates the compatibility conditions: {0}")]
    IncompatibleSpace(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("Newton iteration failed at step {step} (t = {time}): residual {residual:.3e}")]
    StepFailure { step: usize, time: f64, residual: f64 },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("decay fit: {0}")]
    Fit(String),
    #[error("model reduction: {0}")]
    Reduction(String),
    #[error("requested {requested} modes but the snapshot rank is {rank}")]
    RankExceeded { requested: usize, rank: usize },
    #[error("quadrature reduction: {0}")]
    Quadrature(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
