use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} out of range (graph has {count} nodes)")]
    NodeOutOfRange { node: usize, count: usize },

    #[error("graph contains a directed cycle")]
    Cycle,

    #[error("source and sink coincide (node {0})")]
    DegenerateTerminals(usize),

    #[error("no path from node {from} to node {to}")]
    EmptyStrategySpace { from: usize, to: usize },

    #[error("more than {cap} paths; use the DAG-native operations instead of enumeration")]
    PathCapExceeded { cap: usize },

    #[error("no blue path leaves node {0}")]
    NoBluePath(usize),

    #[error("point is outside the strategy polytope: {0}")]
    NotInPolytope(String),

    #[error("point is not in the convex hull of the vertex list")]
    NotInHull,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("projection stopped after {cycles} cycles with constraint violation {violation:e}")]
    ProjectionDiverged { cycles: usize, violation: f64 },

    #[error("second-moment matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("loss {loss} outside the admissible range [0, {max}]")]
    LossOutOfRange { loss: f64, max: f64 },

    #[error("observe called without a pending sample")]
    NoPendingSample,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
