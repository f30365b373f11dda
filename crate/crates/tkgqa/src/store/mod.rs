//! Quadruple TKG storage: interning, temporal/entity indexes, granularity-
//! aware timestamps, subgraph extraction, and path validity checks.

mod graph;
mod path;
mod subgraph;
mod timestamp;

pub use graph::{Direction, EntityId, Fact, RelationId, Tkg, TkgBuilder};
pub use path::{
    validate_path, validate_trp, PathStep, TemporalPath, TemporalReasoningPath,
};
pub use subgraph::Subgraph;
pub use timestamp::{
    compare_ts, parse_timestamp, strictly_before, window_covering, Granularity, TimeWindow,
    Timestamp,
};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("malformed timestamp: {0:?}")]
    MalformedTimestamp(String),
    #[error("invalid calendar date: {0}")]
    InvalidDate(String),
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("topic entity set is empty")]
    EmptyTopics,
    #[error("hop depth must be at least 1")]
    InvalidDepth,
}
