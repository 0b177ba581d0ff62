//! Reward-signal denoising.
//!
//! Finished trajectories whose reward cannot be trusted are intercepted
//! before training: failures caused by the environment (server errors,
//! timeouts, latency anomalies), failures caused by output formatting
//! rather than reasoning, and trajectories at extreme lengths. Filtering
//! replaces attribution; nothing here assigns step-level credit.

mod classify;
mod config;
mod filter;

pub use classify::{
    classify_environmental, classify_extreme, classify_format, is_repetitive_tail, LatencyStats,
    REPETITION_MAX_PERIOD, REPETITION_MIN_REPEATS, REPETITION_WINDOW_TOKENS,
    REPORT_TOKEN_THRESHOLD,
};
pub use config::{Category, DenoiseConfig, DenoiseVerdict, Disposition, EnvAction};
pub use filter::{apply_denoise, AuditEntry, AuditLog, DenoiseError, DenoiseOutcome, KeptTrajectory};
