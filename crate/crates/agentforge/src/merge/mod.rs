//! Parameter-space model merging over binary tensor checkpoints.
//!
//! The pipeline: per-source deltas against the base, magnitude-rank drop
//! probabilities, stochastic drop-and-rescale with a counter-based
//! generator, then a sign-elected weighted average scaled by lambda and
//! added back onto the base. Arithmetic runs in f64 internally and is
//! stored as f32.

mod della;
mod io;
mod tensor;

pub use della::{
    compute_delta, drop_and_rescale, magprune_probs, merge_checkpoints, sign_elect_merge,
    MagpruneProbs, MergeConfig, SignConvention,
};
pub use io::{read_checkpoint, write_checkpoint, CheckpointIoError, CHECKPOINT_MAGIC};
pub use tensor::{Checkpoint, DeltaSet, MergeError, Tensor};
