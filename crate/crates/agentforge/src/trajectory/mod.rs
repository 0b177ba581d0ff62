//! POMDP trajectory data model, trace persistence, and evaluation metrics.
//!
//! A [`Trajectory`] is the unit of reward and training: an ordered list of
//! (thought, action, observation) [`Step`]s ending in a final answer (or a
//! length truncation). Construction is single-writer and index-checked;
//! once finalized a trajectory is immutable and safe to share.

mod metrics;
mod model;
mod trace;

pub use metrics::{exact_match_accuracy, normalize_answer, pass_at_k, MetricsError};
pub use model::{
    special_tokens_balanced, ActionRecord, ObservationRecord, Step, TaskRecord, Trajectory,
    TrajectoryError, SPECIAL_TOKEN_PAIRS,
};
pub use trace::{
    read_summary, read_tasks, read_trace, write_summary, write_trace, PassAtKEntry, RunSummary,
    TraceError,
};
