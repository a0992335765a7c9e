use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected two node identifiers, found {found}")]
    Parse { line: usize, found: usize },

    #[error("node index {index} out of range for graph with {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("game is not transfer-vulnerable: alpha[{node}] = {alpha}")]
    NotTransferVulnerable { node: usize, alpha: f64 },

    #[error("model assumptions violated ({} violations)", .0.violations.len())]
    AssumptionViolated(ValidationReport),

    #[error("size cap exceeded: {what} = {size} > {cap}")]
    SizeCap { what: &'static str, size: usize, cap: usize },

    #[error("selector out of range: {0}")]
    Selector(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
