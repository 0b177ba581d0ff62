use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DenoiseConfigError {
    #[error("l_min ({l_min}) must be strictly below l_max ({l_max})")]
    BadLengthBounds { l_min: usize, l_max: usize },
    #[error("timeout_ms must be positive")]
    ZeroTimeout,
    #[error("neutral_reward {0} is outside [0, 1]")]
    NeutralRewardOutOfRange(f64),
    #[error("could not parse denoise config: {0}")]
    Parse(String),
}

/// What to do with trajectories whose failure is attributed to the
/// environment rather than the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvAction {
    Drop,
    Neutralize,
}

/// Thresholds and policies for the three contamination categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    /// Observation latency above this is treated as an environment timeout.
    pub timeout_ms: u64,
    /// HTTP-style status codes attributed to the environment.
    pub env_status_codes: BTreeSet<u16>,
    /// z-score above which a latency sample counts as anomalous against the
    /// batch latency distribution.
    pub latency_anomaly_z: f64,
    /// Successful trajectories shorter than this many turns are discarded.
    pub l_min: usize,
    /// Failed trajectories longer than this many turns are discarded.
    pub l_max: usize,
    /// Reward assigned when an environmental failure is neutralized.
    pub neutral_reward: f64,
    /// Disposition for environmental failures.
    pub env_action: EnvAction,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            timeout_ms: 120_000,
            env_status_codes: [500, 502, 503, 504].into_iter().collect(),
            latency_anomaly_z: 4.0,
            l_min: 3,
            l_max: 64,
            neutral_reward: 0.5,
            env_action: EnvAction::Neutralize,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<(), DenoiseConfigError> {
        if self.l_min >= self.l_max {
            return Err(DenoiseConfigError::BadLengthBounds {
                l_min: self.l_min,
                l_max: self.l_max,
            });
        }
        if self.timeout_ms == 0 {
            return Err(DenoiseConfigError::ZeroTimeout);
        }
        if !(0.0..=1.0).contains(&self.neutral_reward) || !self.neutral_reward.is_finite() {
            return Err(DenoiseConfigError::NeutralRewardOutOfRange(
                self.neutral_reward,
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, DenoiseConfigError> {
        let config: Self =
            toml::from_str(text).map_err(|e| DenoiseConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

/// Which contamination class a trajectory fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Clean,
    Environmental,
    FormatError,
    ExtremeShortSuccess,
    ExtremeLongFailure,
}

/// How the trainer should treat the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    Keep,
    Discard,
    NeutralizeReward,
    MaskFromGradient,
}

/// Classification result for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseVerdict {
    pub category: Category,
    pub disposition: Disposition,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
}

impl DenoiseVerdict {
    pub fn clean() -> Self {
        Self {
            category: Category::Clean,
            disposition: Disposition::Keep,
            evidence: String::new(),
            step_index: None,
        }
    }

    /// Category/disposition pairing stated in the verdict table.
    pub fn is_consistent(&self, config: &DenoiseConfig) -> bool {
        match self.category {
            Category::Clean => self.disposition == Disposition::Keep,
            Category::Environmental => match config.env_action {
                EnvAction::Drop => self.disposition == Disposition::Discard,
                EnvAction::Neutralize => self.disposition == Disposition::NeutralizeReward,
            },
            Category::FormatError => self.disposition == Disposition::MaskFromGradient,
            Category::ExtremeShortSuccess | Category::ExtremeLongFailure => {
                self.disposition == Disposition::Discard
            }
        }
    }
}
