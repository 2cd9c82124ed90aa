use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("instance has no constraints or no variables")]
    EmptyInstance,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("constraint matrix is rank deficient: numerical rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("cost at index {index} is not strictly positive ({value})")]
    NonPositiveCost { index: usize, value: f64 },

    #[error("right-hand side is the zero vector")]
    ZeroRhs,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("supplies do not sum to zero (sum = {sum})")]
    UnbalancedSupplies { sum: f64 },

    #[error("network is disconnected: grounded incidence matrix has rank {rank} < {rows}")]
    DisconnectedGraph { rank: usize, rows: usize },

    #[error("node index {node} out of range for a network with {node_count} nodes")]
    InvalidNode { node: usize, node_count: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("missing or malformed field `{0}`")]
    Schema(String),

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    AsymmetricInput { max_asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot} failed after regularization)")]
    NotPositiveDefinite { pivot: usize },

    #[error("Laplacian A C A^T is numerically singular (pivot {pivot})")]
    SingularLaplacian { pivot: usize },

    #[error("state coordinate {index} is not strictly positive ({value})")]
    NonPositiveState { index: usize, value: f64 },

    #[error("candidate flow violates A f = b (residual {residual:e})")]
    InfeasibleCandidate { residual: f64 },

    #[error("step produced non-positive coordinate {index} at stage {stage}")]
    PositivityViolation { index: usize, stage: usize },

    #[error("step size collapsed at t = {t} after {halvings} halvings")]
    StepCollapse { t: f64, x: Vec<f64>, halvings: u32 },

    #[error("at t = {t}: {source}")]
    AtTime { t: f64, source: Box<Error> },

    #[error("cost is zero, normalization undefined")]
    ZeroCost,

    #[error("reference distribution has mass at index {index} where the other has none")]
    AbsoluteContinuityViolation { index: usize },

    #[error("vector does not sum to one (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("initial point is not feasible (residual {residual:e})")]
    InfeasibleStart { residual: f64 },

    #[error("linear program has no nonnegative basic solution")]
    Infeasible,

    #[error("instance too large for exhaustive enumeration ({variables} variables, {bases} bases)")]
    TooLarge { variables: usize, bases: u128 },

    #[error("KKT system is singular")]
    SingularSystem,

    #[error("instance is not the unit simplex (A = 1^T, b = 1)")]
    NotSimplexInstance,

    #[error("primal coordinate {index} is not strictly positive ({value})")]
    NonPositivePrimal { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Strips any `AtTime` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
