use thiserror::Error;

use crate::sim::Value;

#[derive(Debug, Error)]
pub enum FramError {
    #[error("rank {k} is outside 1..={n}")]
    RankOutOfRange { k: usize, n: usize },

    #[error("empty input")]
    Empty,

    #[error("{0} needs a known fault budget")]
    UnknownDelta(&'static str),

    #[error("reliable memory exhausted: {needed} bits requested, capacity is {capacity} bits")]
    ReliableCapacity { needed: usize, capacity: usize },

    #[error("value {0} is reserved for the -inf/+inf sentinels")]
    ReservedValue(Value),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FramError> = std::result::Result<T, E>;
