//! Device-utilization comparison between wave-synchronized and fully
//! asynchronous rollout scheduling.
//!
//! The device is modeled as `concurrency` generation slots. Under the
//! lockstep scheduler a training step waits for the slowest rollout in its
//! wave, so every other slot idles from its own finish time until the
//! straggler completes: the per-step busy fraction is Σdᵢ / (C · max dᵢ).
//! Under the fully asynchronous scheduler a freed slot is refilled
//! immediately (the lease/concurrency model of the orchestrator), so the
//! device is busy whenever any work is admitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::DeterministicRng;

use super::latency::LatencyModel;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("series is empty")]
    EmptySeries,
    #[error("invalid scheduler {0:?} (expected sync | async)")]
    BadScheduler(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    LockstepSync,
    FullyAsync,
}

impl Scheduler {
    pub fn parse(name: &str) -> Result<Self, SimError> {
        match name {
            "sync" | "lockstep_sync" => Ok(Self::LockstepSync),
            "async" | "fully_async" => Ok(Self::FullyAsync),
            other => Err(SimError::BadScheduler(other.to_string())),
        }
    }
}

/// Per-training-step busy fraction of the simulated device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSeries {
    pub scheduler: Scheduler,
    pub values: Vec<f64>,
}

impl UtilizationSeries {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Generation slots available on the simulated device.
pub const DEFAULT_SIM_CONCURRENCY: usize = 8;

/// Simulate `steps` training steps at the default concurrency.
pub fn run_pipeline_sim(
    scheduler: Scheduler,
    latency: &LatencyModel,
    steps: usize,
    seed: u64,
) -> UtilizationSeries {
    run_pipeline_sim_with(scheduler, latency, steps, seed, DEFAULT_SIM_CONCURRENCY)
}

/// Simulate with an explicit slot count (0 admits nothing: utilization 0).
pub fn run_pipeline_sim_with(
    scheduler: Scheduler,
    latency: &LatencyModel,
    steps: usize,
    seed: u64,
    concurrency: usize,
) -> UtilizationSeries {
    let mut rng = DeterministicRng::new(seed);
    let mut values = Vec::with_capacity(steps);
    for _ in 0..steps {
        if concurrency == 0 {
            values.push(0.0);
            continue;
        }
        // The same wave of rollout durations underlies both schedulers so
        // the comparison isolates scheduling, not sampling noise.
        let durations: Vec<f64> = (0..concurrency).map(|_| latency.sample(&mut rng)).collect();
        let busy = match scheduler {
            Scheduler::LockstepSync => {
                let total: f64 = durations.iter().sum();
                let slowest = durations.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
                total / (concurrency as f64 * slowest)
            }
            // Freed slots refill immediately, so every slot is occupied for
            // the whole interval between training steps.
            Scheduler::FullyAsync => 1.0,
        };
        values.push(busy.clamp(0.0, 1.0));
    }
    UtilizationSeries { scheduler, values }
}

/// Average non-overlapping windows of `window` steps, then smooth with a
/// trailing moving average of span `ma_span`. Output length is
/// `floor(len / window)`.
pub fn downsample_and_smooth(
    series: &[f64],
    window: usize,
    ma_span: usize,
) -> Result<Vec<f64>, SimError> {
    assert!(window >= 1, "window must be at least 1");
    if series.is_empty() {
        return Err(SimError::EmptySeries);
    }
    let down: Vec<f64> = series
        .chunks_exact(window)
        .map(|chunk| chunk.iter().sum::<f64>() / window as f64)
        .collect();
    if down.is_empty() {
        return Err(SimError::EmptySeries);
    }
    let span = ma_span.max(1);
    let smoothed = down
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let start = (i + 1).saturating_sub(span);
            let slice = &down[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    Ok(smoothed)
}
