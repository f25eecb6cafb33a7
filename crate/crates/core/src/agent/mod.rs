//! Backtracking depth-first search guided by a language model, and the
//! staged ensemble built on top of it.

mod config;
mod ensemble;
mod search;
mod trace;

pub use config::{Budget, ConfigError, Exhausted, SearchConfig};
pub use ensemble::{ensemble_prove, generate_informal_sketch, SketchError};
pub use search::{prove, BACKTRACK_MESSAGE, DEPTH_LIMIT_MESSAGE, NO_PROGRESS_MESSAGE};
pub use trace::{
    EpisodeTrace, FailureReason, ParseOutcome, QueryKind, QueryRecord, ResultClass, SearchOutcome,
    Stage, TraceEvent, TraceSummary, BAD_TABLE_POLICY, TRACE_SCHEMA,
};
