//! Root-cause investigation engine: knowledge graph, telemetry store,
//! change-point detection, clue relevance, expansion and refinement, and the
//! investigation board.

pub mod board;
pub mod changepoint;
pub mod clue;
pub mod engine;
pub mod error;
pub mod expand;
pub mod graph;
pub mod json;
pub mod monitor;
pub mod oracle;
pub mod refine;
pub mod relevance;
pub mod scenario;
pub mod store;
pub mod verify;
pub mod world;

pub use clue::{Clue, FilterClause, FilterPredicate, SeriesKey, TimeRange};
pub use error::{Error, ErrorCode, Result};
