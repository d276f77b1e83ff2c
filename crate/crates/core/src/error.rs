use thiserror::Error;

/// Errors produced by loading, validating, fitting and scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: weighted edges are not supported")]
    WeightedEdge { line: usize },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("line {line}: empty group token")]
    EmptyToken { line: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("balance needs at least two sensitive groups, found {0}")]
    TooFewGroups(usize),

    #[error("label {label} out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("numerical failure: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
