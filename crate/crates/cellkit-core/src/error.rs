use thiserror::Error;

use crate::formula::ParseError;
use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("state index {0} out of range")]
    StateIndex(usize),
    #[error("agent index {0} out of range")]
    AgentIndex(usize),

    #[error("duplicate {kind} `{name}`")]
    DuplicateId { kind: &'static str, name: String },
    #[error("no valuation given for state `{0}`")]
    MissingValuation(String),
    #[error("block_meta for agent `{agent}` refers to block {index}, which does not exist")]
    BlockMetaIndex { agent: String, index: usize },
    #[error("invalid model: {}", render_violations(.0))]
    InvalidModel(Vec<Violation>),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("subset of states must not be empty")]
    EmptySubset,
    #[error("state `{0}` does not belong to the event")]
    StateOutsideEvent(String),
    #[error("models disagree on {0}")]
    VocabularyMismatch(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cell has {size} states, exceeding the exhaustive-search limit of {limit}")]
    CellTooLarge { size: usize, limit: usize },
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
