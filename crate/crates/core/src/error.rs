use thiserror::Error;

/// Errors raised by the throughput engine and the search algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error(
        "feasible-state space overflow on band {band}: {vertices} vertices exceeds cap {cap}"
    )]
    StateSpaceOverflow {
        band: usize,
        vertices: usize,
        cap: usize,
    },

    #[error("arm space overflow: {arms} arms exceeds cap {cap}")]
    ArmSpaceOverflow { arms: u64, cap: u64 },

    #[error("arm index {index} out of range (|A| = {arms})")]
    ArmIndexOutOfRange { index: u64, arms: u64 },

    #[error("search contract violation: {0}")]
    Contract(String),

    #[error("no challenger available: node has a single child")]
    NoChallenger,

    #[error("numeric domain violation in {term}: {detail}")]
    Domain { term: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
