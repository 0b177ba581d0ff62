use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{keyed_u64, keyed_unit};
use crate::trajectory::TaskRecord;

use crate::orchestrator::{PolicyDecision, RolloutPolicy};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyConfigError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("steps range is empty (min {min} > max {max})")]
    EmptyStepsRange { min: usize, max: usize },
}

/// Stand-in for a language-model policy.
///
/// Every choice (step count, format slip, answer correctness) is a pure
/// function of (seed, trajectory id), so rollouts are reproducible and
/// resumable regardless of scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockPolicy {
    /// Probability a rollout ends in the gold answer.
    pub success_prob: f64,
    /// Inclusive range of tool-call steps before answering.
    pub steps_min: usize,
    pub steps_max: usize,
    /// Probability a rollout emits one malformed tool payload.
    pub format_error_prob: f64,
    pub seed: u64,
}

impl Default for MockPolicy {
    fn default() -> Self {
        Self {
            success_prob: 0.5,
            steps_min: 3,
            steps_max: 6,
            format_error_prob: 0.0,
            seed: 0,
        }
    }
}

impl MockPolicy {
    pub fn validate(&self) -> Result<(), PolicyConfigError> {
        for p in [self.success_prob, self.format_error_prob] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(PolicyConfigError::ProbabilityOutOfRange(p));
            }
        }
        if self.steps_min > self.steps_max {
            return Err(PolicyConfigError::EmptyStepsRange {
                min: self.steps_min,
                max: self.steps_max,
            });
        }
        Ok(())
    }

    fn total_steps(&self, trajectory_id: &str) -> usize {
        let span = (self.steps_max - self.steps_min + 1) as u64;
        self.steps_min + (keyed_u64(self.seed, trajectory_id, 0) % span) as usize
    }

    fn succeeds(&self, trajectory_id: &str) -> bool {
        keyed_unit(self.seed, trajectory_id, 1) < self.success_prob
    }

    fn slips_format(&self, trajectory_id: &str) -> bool {
        keyed_unit(self.seed, trajectory_id, 2) < self.format_error_prob
    }
}

impl RolloutPolicy for MockPolicy {
    fn decide(&self, task: &TaskRecord, trajectory_id: &str, steps_taken: usize) -> PolicyDecision {
        let total = self.total_steps(trajectory_id);
        if steps_taken < total {
            // A format slip drops the closing brace of the last tool call.
            let payload = if self.slips_format(trajectory_id) && steps_taken + 1 == total {
                format!(r#"{{"q": "{}", "step": {}"#, task.id, steps_taken + 1)
            } else {
                format!(r#"{{"q": "{}", "step": {}}}"#, task.id, steps_taken + 1)
            };
            PolicyDecision::Invoke {
                thought: format!("working on {} (step {})", task.id, steps_taken + 1),
                tool: "search".into(),
                payload,
            }
        } else if self.succeeds(trajectory_id) && !self.slips_format(trajectory_id) {
            PolicyDecision::Answer {
                text: task.gold_answer.clone(),
            }
        } else {
            PolicyDecision::Answer {
                text: format!("incorrect guess for {}", task.id),
            }
        }
    }

    fn log_prob(&self, trajectory_id: &str, version: u64) -> f64 {
        -1.0 - keyed_unit(self.seed ^ version.wrapping_mul(0x9e37), trajectory_id, 3)
    }
}
