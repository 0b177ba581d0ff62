//! The three contamination classifiers.
//!
//! Each classifier returns `None` for a clean trajectory. Precedence between
//! categories is applied by [`apply_denoise`](super::apply_denoise), not
//! here, so each classifier can be tested in isolation.

use crate::trajectory::Trajectory;

use super::config::{Category, DenoiseConfig, DenoiseVerdict, Disposition, EnvAction};

/// Window of whitespace tokens the repetition detector inspects.
pub const REPETITION_WINDOW_TOKENS: usize = 200;
/// Longest block period the repetition detector considers.
pub const REPETITION_MAX_PERIOD: usize = 20;
/// Minimum consecutive repeats of a block for the tail to count as looping.
pub const REPETITION_MIN_REPEATS: usize = 5;
/// Final answers longer than this many whitespace tokens are treated as a
/// report rather than an answer.
pub const REPORT_TOKEN_THRESHOLD: usize = 400;

/// Batch latency distribution used for the anomaly z-score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean: f64,
    pub std: f64,
}

impl LatencyStats {
    /// Sample mean and population standard deviation over raw latencies.
    pub fn from_samples<I: IntoIterator<Item = u64>>(samples: I) -> Option<Self> {
        let values: Vec<f64> = samples.into_iter().map(|v| v as f64).collect();
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let variance =
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        Some(Self {
            mean,
            std: variance.sqrt(),
        })
    }

    fn z_score(&self, latency_ms: u64) -> f64 {
        if self.std == 0.0 {
            0.0
        } else {
            (latency_ms as f64 - self.mean) / self.std
        }
    }
}

fn env_disposition(config: &DenoiseConfig) -> Disposition {
    match config.env_action {
        EnvAction::Drop => Disposition::Discard,
        EnvAction::Neutralize => Disposition::NeutralizeReward,
    }
}

/// Attribute a failure to the environment: an error status code, a latency
/// past the timeout, or a latency anomalous against the batch distribution.
/// Successes are never attributed to the environment.
pub fn classify_environmental(
    trajectory: &Trajectory,
    config: &DenoiseConfig,
    batch_latency: Option<&LatencyStats>,
) -> Option<DenoiseVerdict> {
    if trajectory.is_success() {
        return None;
    }
    let disposition = env_disposition(config);
    for step in &trajectory.steps {
        let Some(obs) = &step.observation else {
            continue;
        };
        if let Some(code) = obs.status_code {
            if config.env_status_codes.contains(&code) {
                return Some(DenoiseVerdict {
                    category: Category::Environmental,
                    disposition,
                    evidence: format!("status {code} @step{}", step.index),
                    step_index: Some(step.index),
                });
            }
        }
        if obs.latency_ms > config.timeout_ms {
            return Some(DenoiseVerdict {
                category: Category::Environmental,
                disposition,
                evidence: format!(
                    "latency {} ms exceeds timeout {} ms @step{}",
                    obs.latency_ms, config.timeout_ms, step.index
                ),
                step_index: Some(step.index),
            });
        }
        if let Some(stats) = batch_latency {
            let z = stats.z_score(obs.latency_ms);
            if z > config.latency_anomaly_z {
                return Some(DenoiseVerdict {
                    category: Category::Environmental,
                    disposition,
                    evidence: format!(
                        "latency {} ms has z-score {z:.2} @step{}",
                        obs.latency_ms, step.index
                    ),
                    step_index: Some(step.index),
                });
            }
        }
    }
    None
}

/// Full-width variants of the special-token delimiters; generations must use
/// the half-width forms.
fn has_fullwidth_delimiter(text: &str) -> bool {
    crate::trajectory::SPECIAL_TOKEN_PAIRS.iter().any(|(open, _)| {
        let name = open.trim_matches(['<', '>']);
        text.contains(&format!("\u{ff1c}{name}\u{ff1e}"))
            || text.contains(&format!("\u{ff1c}/{name}\u{ff1e}"))
    })
}

/// True when the final window of `tokens` ends in at least
/// [`REPETITION_MIN_REPEATS`] consecutive copies of some block of period
/// `p <= REPETITION_MAX_PERIOD`.
pub fn is_repetitive_tail(text: &str) -> bool {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let window_start = tokens.len().saturating_sub(REPETITION_WINDOW_TOKENS);
    let window = &tokens[window_start..];
    for period in 1..=REPETITION_MAX_PERIOD {
        if window.len() < period * REPETITION_MIN_REPEATS {
            break;
        }
        let block = &window[window.len() - period..];
        let repeats = window
            .rchunks_exact(period)
            .take_while(|chunk| *chunk == block)
            .count();
        if repeats >= REPETITION_MIN_REPEATS {
            return true;
        }
    }
    false
}

/// The last free-form segment the policy generated. Length truncation cuts
/// mid-generation, so a looping model leaves its loop at the end of the
/// final thought (or, lacking one, the final payload).
fn truncated_tail(trajectory: &Trajectory) -> Option<&str> {
    let last = trajectory.steps.last()?;
    Some(
        last.thought
            .as_deref()
            .unwrap_or(last.action.raw_payload.as_str()),
    )
}

/// Detect output-format failures: unparseable payloads, unbalanced or
/// full-width special tokens, report-length answers, and repetitive
/// truncated tails.
pub fn classify_format(trajectory: &Trajectory) -> Option<DenoiseVerdict> {
    if trajectory.is_success() {
        return None;
    }
    let verdict = |evidence: String, step_index: Option<usize>| DenoiseVerdict {
        category: Category::FormatError,
        disposition: Disposition::MaskFromGradient,
        evidence,
        step_index,
    };

    for step in &trajectory.steps {
        if step.action.parsed_params.is_none() {
            return Some(verdict(
                format!("unparseable action payload @step{}", step.index),
                Some(step.index),
            ));
        }
        if !step.action.special_tokens_balanced {
            return Some(verdict(
                format!("unbalanced special tokens @step{}", step.index),
                Some(step.index),
            ));
        }
        if has_fullwidth_delimiter(&step.action.raw_payload) {
            return Some(verdict(
                format!("full-width special-token delimiters @step{}", step.index),
                Some(step.index),
            ));
        }
    }
    if let Some(answer) = &trajectory.final_answer {
        if !crate::trajectory::special_tokens_balanced(answer) {
            return Some(verdict("unbalanced special tokens in answer".into(), None));
        }
        if has_fullwidth_delimiter(answer) {
            return Some(verdict(
                "full-width special-token delimiters in answer".into(),
                None,
            ));
        }
        let answer_tokens = answer.split_whitespace().count();
        if answer_tokens > REPORT_TOKEN_THRESHOLD {
            return Some(verdict(
                format!(
                    "final answer of {answer_tokens} tokens exceeds {REPORT_TOKEN_THRESHOLD} (report, not answer)"
                ),
                None,
            ));
        }
    }
    if trajectory.truncated_by_length {
        if let Some(tail) = truncated_tail(trajectory) {
            if is_repetitive_tail(tail) {
                return Some(verdict("repetitive tail before truncation".into(), None));
            }
        }
    }
    None
}

/// Length outliers: suspiciously short successes and runaway failures.
pub fn classify_extreme(trajectory: &Trajectory, config: &DenoiseConfig) -> Option<DenoiseVerdict> {
    let turns = trajectory.turns();
    if trajectory.is_success() && turns < config.l_min {
        return Some(DenoiseVerdict {
            category: Category::ExtremeShortSuccess,
            disposition: Disposition::Discard,
            evidence: format!("success with {turns} turns below l_min {}", config.l_min),
            step_index: None,
        });
    }
    if !trajectory.is_success() && turns > config.l_max {
        return Some(DenoiseVerdict {
            category: Category::ExtremeLongFailure,
            disposition: Disposition::Discard,
            evidence: format!("failure with {turns} turns above l_max {}", config.l_max),
            step_index: None,
        });
    }
    None
}
