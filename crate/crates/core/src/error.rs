use thiserror::Error;

use crate::scenario::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// No voltage-source node is left to define the bus voltage.
    #[error("bus collapse: no voltage-source node is available to hold the DC bus")]
    BusCollapse,

    #[error("command rejected by node `{node}`: {reason}")]
    RejectedCommand { node: String, reason: &'static str },

    #[error("no built-in case {0} (expected 1, 2 or 3)")]
    InvalidCase(u32),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("scenario has {} violation(s)", .0.len())]
    InvalidScenario(Vec<Violation>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
