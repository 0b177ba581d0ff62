//! Asynchronous rollout orchestration.
//!
//! The pieces of the sampling/training loop: a lease coordinator enforcing
//! exclusive memory-phase ownership, a persistent auditable trajectory
//! store, freshness-bounded batch selection with clipped importance
//! weights, prefix-merged forward planning, and a deterministic simulation
//! runner wiring them together.

mod lease;
mod ops;
mod prefix;
mod run;
mod store;

pub use lease::{transitions_consistent, LeaseCoordinator, LeaseError, Phase, Transition};
pub use ops::{
    clipped_is_weight, regulate_concurrency, select_training_batch, OffPolicyConfig,
    OrchestratorError,
};
pub use prefix::{build_prefix_plan, score_standalone, PrefixError, PrefixPlan};
pub use run::{
    generate_uninterrupted, run_orchestration, EchoEnv, Environment, OrchestrationReport,
    OrchestratorConfig, PolicyDecision, RolloutPolicy,
};
pub use store::{EventKind, EventRecord, StoreError, StoredTrajectory, TrajectoryStore};
