use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

use super::classify::{
    classify_environmental, classify_extreme, classify_format, LatencyStats,
};
use super::config::{Category, DenoiseConfig, DenoiseVerdict, Disposition};

#[derive(Debug, Error, PartialEq)]
pub enum DenoiseError {
    #[error("trajectory {0:?} is not finalized")]
    UnfinalizedTrajectory(String),
    #[error("trajectory {0:?} has no reward")]
    MissingReward(String),
}

/// A trajectory that survived filtering. `masked` trajectories stay in the
/// batch but contribute no loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptTrajectory {
    pub trajectory: Trajectory,
    pub masked: bool,
}

/// One audited non-clean classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub id: String,
    pub category: Category,
    pub disposition: Disposition,
    pub evidence: String,
}

/// Per-category counts plus the per-trajectory evidence, ordered by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub counts: BTreeMap<Category, usize>,
    pub entries: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutcome {
    pub kept: Vec<KeptTrajectory>,
    pub audit: AuditLog,
}

/// Classify one trajectory under the category precedence
/// Environmental > FormatError > Extreme.
pub(crate) fn classify_one(
    trajectory: &Trajectory,
    config: &DenoiseConfig,
    batch_latency: Option<&LatencyStats>,
) -> DenoiseVerdict {
    classify_environmental(trajectory, config, batch_latency)
        .or_else(|| classify_format(trajectory))
        .or_else(|| classify_extreme(trajectory, config))
        .unwrap_or_else(DenoiseVerdict::clean)
}

/// Apply the three-tier filter to a finished batch.
///
/// Input order is preserved in the kept set; the audit log is ordered by
/// trajectory id so that concurrent classification cannot change the output.
pub fn apply_denoise(
    batch: &[Trajectory],
    config: &DenoiseConfig,
) -> Result<DenoiseOutcome, DenoiseError> {
    for t in batch {
        if !t.is_finalized() {
            return Err(DenoiseError::UnfinalizedTrajectory(t.id.clone()));
        }
        if t.reward.is_none() {
            return Err(DenoiseError::MissingReward(t.id.clone()));
        }
    }

    let batch_latency = LatencyStats::from_samples(
        batch
            .iter()
            .flat_map(|t| t.steps.iter())
            .filter_map(|s| s.observation.as_ref())
            .map(|o| o.latency_ms),
    );

    let mut kept = Vec::new();
    let mut audit = AuditLog::default();
    for t in batch {
        let verdict = classify_one(t, config, batch_latency.as_ref());
        debug_assert!(verdict.is_consistent(config));
        if verdict.category != Category::Clean {
            *audit.counts.entry(verdict.category).or_insert(0) += 1;
            audit.entries.push(AuditEntry {
                id: t.id.clone(),
                category: verdict.category,
                disposition: verdict.disposition,
                evidence: verdict.evidence.clone(),
            });
        }
        match verdict.disposition {
            Disposition::Keep => kept.push(KeptTrajectory {
                trajectory: t.clone(),
                masked: false,
            }),
            Disposition::Discard => {}
            Disposition::NeutralizeReward => {
                let mut neutralized = t.clone();
                neutralized.reward = Some(config.neutral_reward);
                kept.push(KeptTrajectory {
                    trajectory: neutralized,
                    masked: false,
                });
            }
            Disposition::MaskFromGradient => kept.push(KeptTrajectory {
                trajectory: t.clone(),
                masked: true,
            }),
        }
    }
    audit.entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(DenoiseOutcome { kept, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::EnvAction;
    use crate::trajectory::{ActionRecord, ObservationRecord, Step, Trajectory};

    fn make_trajectory(id: &str, turns: usize, reward: f64) -> Trajectory {
        let mut t = Trajectory::new(id, "q", 0);
        for i in 1..=turns {
            t.append_step(Step {
                index: i,
                thought: Some("reasoning".into()),
                action: ActionRecord::from_payload("search", r#"{"q": "x"}"#),
                observation: Some(ObservationRecord::ok("result", 100)),
            })
            .unwrap();
        }
        t.finalize("answer").unwrap();
        t.set_reward(reward).unwrap();
        t
    }

    fn with_status(mut t: Trajectory, step: usize, code: u16) -> Trajectory {
        t.steps[step - 1].observation.as_mut().unwrap().status_code = Some(code);
        t
    }

    #[test]
    fn env_failures_are_neutralized_and_counted() {
        let mut batch: Vec<Trajectory> =
            (0..8).map(|i| make_trajectory(&format!("ok{i}"), 5, 1.0)).collect();
        batch.push(with_status(make_trajectory("bad1", 5, 0.0), 2, 502));
        batch.push(with_status(make_trajectory("bad2", 5, 0.0), 4, 502));
        let out = apply_denoise(&batch, &DenoiseConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 10);
        let neutralized: Vec<_> = out
            .kept
            .iter()
            .filter(|k| k.trajectory.reward == Some(0.5))
            .collect();
        assert_eq!(neutralized.len(), 2);
        assert_eq!(out.audit.counts.get(&Category::Environmental), Some(&2));
        assert_eq!(out.audit.entries.len(), 2);
    }

    #[test]
    fn env_drop_action_removes_instead() {
        let config = DenoiseConfig {
            env_action: EnvAction::Drop,
            ..DenoiseConfig::default()
        };
        let batch = vec![
            make_trajectory("a", 5, 1.0),
            with_status(make_trajectory("b", 5, 0.0), 1, 500),
        ];
        let out = apply_denoise(&batch, &config).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].trajectory.id, "a");
    }

    #[test]
    fn format_error_is_masked_but_kept() {
        let mut bad = Trajectory::new("fmt", "q", 0);
        for i in 1..=5 {
            bad.append_step(Step {
                index: i,
                thought: None,
                action: ActionRecord::from_payload("search", r#"{"q": "x""#),
                observation: Some(ObservationRecord::ok("r", 100)),
            })
            .unwrap();
        }
        bad.finalize("nope").unwrap();
        bad.set_reward(0.0).unwrap();
        let mut batch: Vec<Trajectory> =
            (0..9).map(|i| make_trajectory(&format!("ok{i}"), 5, 1.0)).collect();
        batch.push(bad);
        let out = apply_denoise(&batch, &DenoiseConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 10);
        assert_eq!(out.kept.iter().filter(|k| k.masked).count(), 1);
        assert_eq!(out.audit.counts.get(&Category::FormatError), Some(&1));
    }

    #[test]
    fn extreme_long_failure_is_discarded() {
        let mut batch: Vec<Trajectory> =
            (0..9).map(|i| make_trajectory(&format!("ok{i}"), 5, 1.0)).collect();
        batch.push(make_trajectory("long", 70, 0.0));
        let out = apply_denoise(&batch, &DenoiseConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 9);
        assert_eq!(out.audit.counts.get(&Category::ExtremeLongFailure), Some(&1));
    }

    #[test]
    fn precedence_environmental_beats_format_and_extreme() {
        // 70 turns (extreme), unparseable payload at step 1 (format), and a
        // 502 at step 3 (environmental): environmental wins.
        let mut t = Trajectory::new("multi", "q", 0);
        for i in 1..=70 {
            let payload = if i == 1 { r#"{"q": "x"# } else { r#"{"q": "x"}"# };
            t.append_step(Step {
                index: i,
                thought: None,
                action: ActionRecord::from_payload("search", payload),
                observation: Some(ObservationRecord::ok("r", 100)),
            })
            .unwrap();
        }
        t.steps[2].observation.as_mut().unwrap().status_code = Some(502);
        t.finalize("nope").unwrap();
        t.set_reward(0.0).unwrap();
        let out = apply_denoise(&[t], &DenoiseConfig::default()).unwrap();
        assert_eq!(out.audit.entries[0].category, Category::Environmental);
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn conservation_and_clean_pass_through() {
        let batch: Vec<Trajectory> = vec![
            make_trajectory("a", 5, 1.0),
            make_trajectory("b", 10, 0.0),
            make_trajectory("c", 70, 0.0), // discarded
        ];
        let out = apply_denoise(&batch, &DenoiseConfig::default()).unwrap();
        let discarded = batch.len() - out.kept.len();
        assert_eq!(out.kept.len() + discarded, batch.len());
        // Clean trajectories are bit-identical to their inputs.
        assert_eq!(out.kept[0].trajectory, batch[0]);
        assert_eq!(out.kept[1].trajectory, batch[1]);
        assert!(!out.kept[0].masked && !out.kept[1].masked);
    }

    #[test]
    fn unfinalized_and_unrewarded_inputs_are_errors() {
        let open = Trajectory::new("open", "q", 0);
        assert_eq!(
            apply_denoise(&[open], &DenoiseConfig::default()),
            Err(DenoiseError::UnfinalizedTrajectory("open".into()))
        );
        let mut no_reward = Trajectory::new("nr", "q", 0);
        no_reward.finalize("x").unwrap();
        assert_eq!(
            apply_denoise(&[no_reward], &DenoiseConfig::default()),
            Err(DenoiseError::MissingReward("nr".into()))
        );
    }

    #[test]
    fn audit_is_ordered_by_id_and_deterministic() {
        let batch = vec![
            with_status(make_trajectory("zz", 5, 0.0), 1, 503),
            with_status(make_trajectory("aa", 5, 0.0), 1, 504),
        ];
        let config = DenoiseConfig::default();
        let first = apply_denoise(&batch, &config).unwrap();
        let second = apply_denoise(&batch, &config).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.audit.entries[0].id, "aa");
        assert_eq!(first.audit.entries[1].id, "zz");
    }

    #[test]
    fn audit_log_serializes_with_string_category_keys() {
        let batch = vec![with_status(make_trajectory("a", 5, 0.0), 1, 500)];
        let out = apply_denoise(&batch, &DenoiseConfig::default()).unwrap();
        let json = serde_json::to_string(&out.audit).unwrap();
        assert!(json.contains("\"Environmental\":1"), "{json}");
        let back: AuditLog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.audit);
    }
}
