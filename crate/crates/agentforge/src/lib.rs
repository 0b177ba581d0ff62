//! Desk-scale agent pipeline infrastructure.
//!
//! `agentforge` packages the algorithmic core of an agent training pipeline
//! together with the systems machinery around it, at a scale where every
//! mechanism runs deterministically on one machine:
//!
//! - [`trajectory`] — the POMDP trajectory data model, JSONL trace
//!   persistence, and the accuracy / pass@k metrics everything else consumes.
//! - [`merge`] — parameter-space model merging over binary tensor
//!   checkpoints (delta extraction, magnitude-rank pruning, sign-elected
//!   weighted averaging).
//! - [`denoise`] — three-tier reward-signal filtering that classifies
//!   finished trajectories as environmental, format, or extreme-length
//!   contamination before they reach a trainer.
//! - [`gateway`] — a fault-tolerant tool-invocation gateway: versioned
//!   registry, instance pools, layered timeouts, bounded retries with
//!   exponential backoff, fallback routing, rate limiting, and a
//!   fault-injection harness.
//! - [`orchestrator`] — asynchronous rollout orchestration: phase leases,
//!   an append-only auditable trajectory store, staleness-bounded batch
//!   selection, clipped importance weights, and prefix-merged forward plans.
//! - [`sim`] — mock policies, latency models, and discrete-event workload
//!   simulation for utilization and pass@k experiments.
//! - [`harness`] — configuration loading, the parallel evaluation runner,
//!   and CSV/JSON/SVG report emission behind the `agentforge` CLI.
//!
//! Mock policies and in-process tool backends stand in for real models and
//! services, so the whole pipeline is testable end to end with virtual time.
//!
//! ```
//! use agentforge::trajectory::pass_at_k;
//!
//! // 2 successes out of 5 attempts: 7 of the 10 possible pairs contain one.
//! let p = pass_at_k(5, 2, 2).unwrap();
//! assert!((p - 0.7).abs() < 1e-12);
//! ```

// Every Rust block in the guide runs as a doc-test, so the book cannot
// drift from the API it documents.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/merging.md")]
    mod merging {}
    #[doc = include_str!("../../../book/src/denoising.md")]
    mod denoising {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/orchestration.md")]
    mod orchestration {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}

pub mod clock;
pub mod denoise;
pub mod gateway;
pub mod harness;
pub mod merge;
pub mod orchestrator;
pub mod rng;
pub mod sim;
pub mod trajectory;
