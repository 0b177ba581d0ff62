use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ErrorCode;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory is already finalized")]
    AlreadyFinalized,
    #[error("step index {got} does not continue the trajectory (expected {expected})")]
    IndexGap { expected: usize, got: usize },
    #[error("reward can only be set on a finalized trajectory")]
    NotFinalized,
    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(f64),
}

/// The action emitted at one step: a tool invocation as the policy wrote it.
///
/// `raw_payload` is kept verbatim (possibly malformed); `parsed_params` is
/// present exactly when the payload parses as a JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub tool_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    pub raw_payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_params: Option<BTreeMap<String, serde_json::Value>>,
    pub special_tokens_balanced: bool,
}

impl ActionRecord {
    /// Build a record from a raw payload, deriving `parsed_params` and the
    /// special-token balance flag from the text itself.
    pub fn from_payload(tool_name: impl Into<String>, raw_payload: impl Into<String>) -> Self {
        let raw_payload = raw_payload.into();
        let parsed_params = serde_json::from_str::<BTreeMap<String, serde_json::Value>>(
            &raw_payload,
        )
        .ok();
        let special_tokens_balanced = special_tokens_balanced(&raw_payload);
        Self {
            tool_name: tool_name.into(),
            tool_version: None,
            raw_payload,
            parsed_params,
            special_tokens_balanced,
        }
    }
}

/// Paired open/close tags that must balance in generated text.
pub const SPECIAL_TOKEN_PAIRS: &[(&str, &str)] =
    &[("<answer>", "</answer>"), ("<tool_call>", "</tool_call>")];

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

/// True when every special open tag has a matching close tag.
pub fn special_tokens_balanced(text: &str) -> bool {
    SPECIAL_TOKEN_PAIRS.iter().all(|(open, close)| {
        count_occurrences(text, open) == count_occurrences(text, close)
    })
}

/// What came back from the environment after an action was dispatched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_code: Option<u16>,
    pub latency_ms: u64,
    pub content: String,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
}

impl ObservationRecord {
    pub fn ok(content: impl Into<String>, latency_ms: u64) -> Self {
        Self {
            status_code: Some(200),
            latency_ms,
            content: content.into(),
            truncated: false,
            error_code: None,
        }
    }
}

/// One (thought, action, observation) element of the interaction history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based position within the trajectory.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action: ActionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationRecord>,
}

/// A complete interaction trajectory for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub query: String,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    pub policy_version: u64,
    #[serde(default)]
    pub truncated_by_length: bool,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, query: impl Into<String>, policy_version: u64) -> Self {
        Self {
            id: id.into(),
            query: query.into(),
            steps: Vec::new(),
            final_answer: None,
            reward: None,
            policy_version,
            truncated_by_length: false,
        }
    }

    /// A trajectory is finalized once it has an answer or was cut by length.
    pub fn is_finalized(&self) -> bool {
        self.final_answer.is_some() || self.truncated_by_length
    }

    /// Number of interaction turns, `|H|`.
    pub fn turns(&self) -> usize {
        self.steps.len()
    }

    /// Append the next step. The step index must be exactly `turns() + 1`.
    pub fn append_step(&mut self, step: Step) -> Result<(), TrajectoryError> {
        if self.is_finalized() {
            return Err(TrajectoryError::AlreadyFinalized);
        }
        let expected = self.steps.len() + 1;
        if step.index != expected {
            return Err(TrajectoryError::IndexGap {
                expected,
                got: step.index,
            });
        }
        self.steps.push(step);
        Ok(())
    }

    /// Finalize with an answer text.
    pub fn finalize(&mut self, answer: impl Into<String>) -> Result<(), TrajectoryError> {
        if self.is_finalized() {
            return Err(TrajectoryError::AlreadyFinalized);
        }
        self.final_answer = Some(answer.into());
        Ok(())
    }

    /// Finalize by length truncation; no answer is recorded.
    pub fn finalize_truncated(&mut self) -> Result<(), TrajectoryError> {
        if self.is_finalized() {
            return Err(TrajectoryError::AlreadyFinalized);
        }
        self.truncated_by_length = true;
        Ok(())
    }

    /// Attach the outcome reward. Requires a finalized trajectory.
    pub fn set_reward(&mut self, reward: f64) -> Result<(), TrajectoryError> {
        if !self.is_finalized() {
            return Err(TrajectoryError::NotFinalized);
        }
        if !(0.0..=1.0).contains(&reward) || !reward.is_finite() {
            return Err(TrajectoryError::RewardOutOfRange(reward));
        }
        self.reward = Some(reward);
        Ok(())
    }

    /// Reward interpreted as a binary outcome (success iff reward > 0.5).
    pub fn is_success(&self) -> bool {
        self.reward.map(|r| r > 0.5).unwrap_or(false)
    }
}

/// A benchmark task: question plus ground-truth answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: usize) -> Step {
        Step {
            index,
            thought: Some("think".into()),
            action: ActionRecord::from_payload("search", r#"{"query": "x"}"#),
            observation: Some(ObservationRecord::ok("result", 12)),
        }
    }

    #[test]
    fn append_to_empty_trajectory() {
        let mut t = Trajectory::new("t1", "q", 0);
        t.append_step(step(1)).unwrap();
        assert_eq!(t.turns(), 1);
    }

    #[test]
    fn append_with_index_gap_is_rejected() {
        let mut t = Trajectory::new("t1", "q", 0);
        for i in 1..=3 {
            t.append_step(step(i)).unwrap();
        }
        assert_eq!(
            t.append_step(step(5)),
            Err(TrajectoryError::IndexGap {
                expected: 4,
                got: 5
            })
        );
    }

    #[test]
    fn append_after_finalize_is_rejected() {
        let mut t = Trajectory::new("t1", "q", 0);
        t.finalize("Paris").unwrap();
        assert_eq!(t.append_step(step(1)), Err(TrajectoryError::AlreadyFinalized));
    }

    #[test]
    fn finalize_sets_answer_once() {
        let mut t = Trajectory::new("t1", "q", 0);
        t.finalize("Paris").unwrap();
        assert_eq!(t.final_answer.as_deref(), Some("Paris"));
        assert_eq!(t.finalize("London"), Err(TrajectoryError::AlreadyFinalized));
    }

    #[test]
    fn finalize_truncated_leaves_answer_absent() {
        let mut t = Trajectory::new("t1", "q", 0);
        t.finalize_truncated().unwrap();
        assert!(t.truncated_by_length);
        assert!(t.final_answer.is_none());
        assert!(t.is_finalized());
    }

    #[test]
    fn reward_requires_finalization_and_range() {
        let mut t = Trajectory::new("t1", "q", 0);
        assert_eq!(t.set_reward(1.0), Err(TrajectoryError::NotFinalized));
        t.finalize("x").unwrap();
        assert_eq!(t.set_reward(1.5), Err(TrajectoryError::RewardOutOfRange(1.5)));
        t.set_reward(1.0).unwrap();
        assert!(t.is_success());
    }

    #[test]
    fn action_record_parses_well_formed_payload() {
        let a = ActionRecord::from_payload("search", r#"{"query": "x"}"#);
        assert!(a.parsed_params.is_some());
        let b = ActionRecord::from_payload("search", r#"{"query": "x""#);
        assert!(b.parsed_params.is_none());
    }

    #[test]
    fn special_token_balance() {
        assert!(special_tokens_balanced("<answer>42</answer>"));
        assert!(!special_tokens_balanced("<answer>42"));
        assert!(special_tokens_balanced("no tags at all"));
        assert!(!special_tokens_balanced("<tool_call>x</tool_call><tool_call>"));
    }
}
