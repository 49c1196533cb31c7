//! Crate-wide error type.

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("seed not in graph")]
    SeedNotInGraph,
    #[error("node not visible: {0}")]
    NodeNotVisible(NodeId),
    #[error("node already crawled: {0}")]
    AlreadyCrawled(NodeId),
    #[error("node id out of range: {0}")]
    NodeOutOfRange(u64),
    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),
    #[error("empty target set")]
    EmptyTargetSet,
    #[error("non-target seed: {0}")]
    NonTargetSeed(NodeId),
    #[error("graph exhausted: frontier is empty")]
    GraphExhausted,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("unlabeled training sample at index {0}")]
    UnlabeledSample(usize),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("histogram input {0} outside [0,1]")]
    ValueOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}:{line}: malformed line: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("empty graph")]
    EmptyGraph,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("model parse error: {0}")]
    ModelParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
