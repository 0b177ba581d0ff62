use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

use super::store::{EventKind, StoreError, TrajectoryStore};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("not enough fresh data: {selected} of {requested} eligible; wait for ~{wait_hint_trajectories} more trajectories")]
    InsufficientFreshData {
        /// Trajectories that were eligible (already marked consumed).
        partial: Vec<Trajectory>,
        selected: usize,
        requested: usize,
        /// How many more eligible trajectories are needed for a full batch.
        wait_hint_trajectories: usize,
    },
    #[error("log-probabilities must be finite (got {0})")]
    NonFiniteInput(f64),
    #[error("clip_c must exceed 1 (got {0})")]
    ClipOutOfRange(f64),
    #[error("max_staleness/clip_c configuration invalid: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Freshness bound and importance-weight clip for off-policy consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffPolicyConfig {
    /// Largest tolerated policy-version gap `S` between generation and
    /// training.
    pub max_staleness: u64,
    /// Importance weights are clamped to `[1/clip_c, clip_c]`.
    pub clip_c: f64,
}

impl Default for OffPolicyConfig {
    fn default() -> Self {
        Self {
            max_staleness: 2,
            clip_c: 5.0,
        }
    }
}

impl OffPolicyConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if !(self.clip_c > 1.0) || !self.clip_c.is_finite() {
            return Err(OrchestratorError::ClipOutOfRange(self.clip_c));
        }
        Ok(())
    }
}

/// How many new rollouts to admit so that in-flight work approaches but
/// never exceeds the target.
pub fn regulate_concurrency(target_concurrency: usize, in_flight: usize) -> usize {
    target_concurrency.saturating_sub(in_flight)
}

/// Bounded importance weight `clamp(exp(logp_new − logp_old), 1/c, c)`.
pub fn clipped_is_weight(
    logp_new: f64,
    logp_old: f64,
    clip_c: f64,
) -> Result<f64, OrchestratorError> {
    if !logp_new.is_finite() {
        return Err(OrchestratorError::NonFiniteInput(logp_new));
    }
    if !logp_old.is_finite() {
        return Err(OrchestratorError::NonFiniteInput(logp_old));
    }
    if !(clip_c > 1.0) || !clip_c.is_finite() {
        return Err(OrchestratorError::ClipOutOfRange(clip_c));
    }
    Ok((logp_new - logp_old).exp().clamp(1.0 / clip_c, clip_c))
}

/// Select the oldest eligible trajectories for training and mark them
/// consumed.
///
/// A short batch is still consumed (work is conserved) but reported through
/// `InsufficientFreshData` together with a wait hint, so the trainer can
/// decide whether to step on the partial batch or wait for samplers.
pub fn select_training_batch(
    store: &mut TrajectoryStore,
    current_version: u64,
    config: &OffPolicyConfig,
    batch_size: usize,
    now_ms: u64,
) -> Result<Vec<Trajectory>, OrchestratorError> {
    config.validate()?;
    let ids: Vec<String> = store
        .eligible_for_training(current_version, config.max_staleness)
        .into_iter()
        .take(batch_size)
        .map(|s| s.trajectory.id.clone())
        .collect();
    let mut batch = Vec::with_capacity(ids.len());
    for id in &ids {
        store.append_event(id, EventKind::TrainingConsumed, now_ms)?;
        batch.push(store.get(id).expect("just consumed").trajectory.clone());
    }
    if batch.len() < batch_size {
        let selected = batch.len();
        return Err(OrchestratorError::InsufficientFreshData {
            partial: batch,
            selected,
            requested: batch_size,
            wait_hint_trajectories: batch_size - selected,
        });
    }
    Ok(batch)
}
