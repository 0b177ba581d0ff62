//! Constructed 30-trajectory corpus with planted contaminations, used as the
//! golden fixture for the reward-denoise classifiers.

use serde::{Deserialize, Serialize};

use crate::denoise::{Category, DenoiseConfig, Disposition, EnvAction};
use crate::rng::DeterministicRng;
use crate::trajectory::{ActionRecord, ObservationRecord, Step, Trajectory};

/// Expected classification for one corpus trajectory under
/// [`DenoiseConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVerdict {
    pub id: String,
    pub category: Category,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCorpus {
    pub trajectories: Vec<Trajectory>,
    pub expected: Vec<ExpectedVerdict>,
}

pub const GOLDEN_CORPUS_SEED: u64 = 42;
pub const GOLDEN_CORPUS_SIZE: usize = 30;

fn clean_step(index: usize, rng: &mut DeterministicRng) -> Step {
    Step {
        index,
        thought: Some(format!("considering option {}", rng.below(100))),
        action: ActionRecord::from_payload(
            "search",
            format!(r#"{{"q": "lead {}", "step": {index}}}"#, rng.below(1000)),
        ),
        observation: Some(ObservationRecord::ok(
            format!("snippet {}", rng.below(1000)),
            80 + rng.below(40),
        )),
    }
}

fn base(id: &str, turns: usize, rng: &mut DeterministicRng) -> Trajectory {
    let mut t = Trajectory::new(id, format!("question for {id}"), 0);
    for i in 1..=turns {
        t.append_step(clean_step(i, rng)).unwrap();
    }
    t
}

fn finish(mut t: Trajectory, answer: &str, reward: f64) -> Trajectory {
    t.finalize(answer).unwrap();
    t.set_reward(reward).unwrap();
    t
}

/// Build the corpus. The structure (which contamination goes where) is
/// fixed; the seed only varies incidental content, so a given seed always
/// produces byte-identical output.
pub fn generate_golden_corpus(seed: u64) -> GoldenCorpus {
    let mut rng = DeterministicRng::new(seed);
    let mut trajectories = Vec::with_capacity(GOLDEN_CORPUS_SIZE);
    let mut expected = Vec::with_capacity(GOLDEN_CORPUS_SIZE);
    let push = |t: Trajectory, category: Category, disposition: Disposition,
                    trajectories: &mut Vec<Trajectory>,
                    expected: &mut Vec<ExpectedVerdict>| {
        expected.push(ExpectedVerdict {
            id: t.id.clone(),
            category,
            disposition,
        });
        trajectories.push(t);
    };

    // 10 clean successes.
    for i in 0..10 {
        let t = finish(
            base(&format!("gc-clean-ok-{i:02}"), 3 + (i % 4), &mut rng),
            "the gold answer",
            1.0,
        );
        push(t, Category::Clean, Disposition::Keep, &mut trajectories, &mut expected);
    }
    // 7 clean failures.
    for i in 0..7 {
        let t = finish(
            base(&format!("gc-clean-fail-{i:02}"), 4 + (i % 3), &mut rng),
            "a confident wrong answer",
            0.0,
        );
        push(t, Category::Clean, Disposition::Keep, &mut trajectories, &mut expected);
    }
    // 4 environmental failures: two error statuses, one timeout, one
    // latency anomaly (large against the batch, still under the timeout).
    for (i, code) in [(0u32, 502u16), (1, 503)] {
        let mut t = base(&format!("gc-env-status-{i:02}"), 5, &mut rng);
        t.steps[2].observation.as_mut().unwrap().status_code = Some(code);
        let t = finish(t, "gave up", 0.0);
        push(t, Category::Environmental, Disposition::NeutralizeReward, &mut trajectories, &mut expected);
    }
    {
        let mut t = base("gc-env-timeout-00", 4, &mut rng);
        t.steps[1].observation.as_mut().unwrap().latency_ms = 130_000;
        let t = finish(t, "timed out", 0.0);
        push(t, Category::Environmental, Disposition::NeutralizeReward, &mut trajectories, &mut expected);
    }
    {
        let mut t = base("gc-env-zscore-00", 4, &mut rng);
        t.steps[3].observation.as_mut().unwrap().latency_ms = 60_000;
        let t = finish(t, "too slow", 0.0);
        push(t, Category::Environmental, Disposition::NeutralizeReward, &mut trajectories, &mut expected);
    }
    // 5 format errors.
    {
        let mut t = base("gc-fmt-parse-00", 4, &mut rng);
        t.steps[1].action = ActionRecord::from_payload("search", r#"{"q": "unclosed"#);
        let t = finish(t, "wrong", 0.0);
        push(t, Category::FormatError, Disposition::MaskFromGradient, &mut trajectories, &mut expected);
    }
    {
        let t = base("gc-fmt-tag-00", 4, &mut rng);
        let t = finish(t, "<answer>42", 0.0);
        push(t, Category::FormatError, Disposition::MaskFromGradient, &mut trajectories, &mut expected);
    }
    {
        let t = base("gc-fmt-fullwidth-00", 4, &mut rng);
        let t = finish(t, "\u{ff1c}answer\u{ff1e}42\u{ff1c}/answer\u{ff1e}", 0.0);
        push(t, Category::FormatError, Disposition::MaskFromGradient, &mut trajectories, &mut expected);
    }
    {
        let t = base("gc-fmt-report-00", 4, &mut rng);
        let report = (0..401).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let t = finish(t, &report, 0.0);
        push(t, Category::FormatError, Disposition::MaskFromGradient, &mut trajectories, &mut expected);
    }
    {
        let mut t = base("gc-fmt-loop-00", 3, &mut rng);
        t.append_step(Step {
            index: 4,
            thought: Some("and then go back go back go back go back go back".into()),
            action: ActionRecord::from_payload("search", r#"{"q": "again"}"#),
            observation: Some(ObservationRecord::ok("same snippet", 90)),
        })
        .unwrap();
        t.finalize_truncated().unwrap();
        t.set_reward(0.0).unwrap();
        push(t, Category::FormatError, Disposition::MaskFromGradient, &mut trajectories, &mut expected);
    }
    // 2 extreme short successes.
    for i in 0..2 {
        let t = finish(
            base(&format!("gc-short-{i:02}"), 2, &mut rng),
            "the gold answer",
            1.0,
        );
        push(t, Category::ExtremeShortSuccess, Disposition::Discard, &mut trajectories, &mut expected);
    }
    // 2 extreme long failures.
    for i in 0..2 {
        let t = finish(
            base(&format!("gc-long-{i:02}"), 65 + i, &mut rng),
            "meandering wrong answer",
            0.0,
        );
        push(t, Category::ExtremeLongFailure, Disposition::Discard, &mut trajectories, &mut expected);
    }

    assert_eq!(trajectories.len(), GOLDEN_CORPUS_SIZE);
    assert_eq!(expected.len(), GOLDEN_CORPUS_SIZE);
    GoldenCorpus {
        trajectories,
        expected,
    }
}

/// The config the expected-verdict table was computed under.
pub fn golden_config() -> DenoiseConfig {
    DenoiseConfig {
        env_action: EnvAction::Neutralize,
        ..DenoiseConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::apply_denoise;
    use crate::trajectory::write_trace;

    #[test]
    fn corpus_is_byte_identical_per_seed() {
        let a = generate_golden_corpus(GOLDEN_CORPUS_SEED);
        let b = generate_golden_corpus(GOLDEN_CORPUS_SEED);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        write_trace(&a.trajectories, &pa).unwrap();
        write_trace(&b.trajectories, &pb).unwrap();
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }

    #[test]
    fn regeneration_matches_shipped_fixture_bytes() {
        let corpus = generate_golden_corpus(GOLDEN_CORPUS_SEED);
        let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let dir = tempfile::tempdir().unwrap();
        let regenerated = dir.path().join("corpus.jsonl");
        write_trace(&corpus.trajectories, &regenerated).unwrap();
        assert_eq!(
            std::fs::read(regenerated).unwrap(),
            std::fs::read(fixtures.join("golden_corpus.jsonl")).unwrap(),
            "fixtures/golden_corpus.jsonl is stale; regenerate with `agentforge golden-corpus`"
        );
        let verdicts = serde_json::to_string_pretty(&corpus.expected).unwrap();
        assert_eq!(
            verdicts,
            std::fs::read_to_string(fixtures.join("golden_verdicts.json")).unwrap(),
            "fixtures/golden_verdicts.json is stale; regenerate with `agentforge golden-corpus`"
        );
    }

    #[test]
    fn corpus_covers_every_category_at_least_twice() {
        let corpus = generate_golden_corpus(GOLDEN_CORPUS_SEED);
        for category in [
            Category::Environmental,
            Category::FormatError,
            Category::ExtremeShortSuccess,
            Category::ExtremeLongFailure,
        ] {
            let n = corpus.expected.iter().filter(|e| e.category == category).count();
            assert!(n >= 2, "{category:?} appears {n} times");
        }
        assert_eq!(corpus.expected.len(), corpus.trajectories.len());
    }

    #[test]
    fn classification_matches_expected_table_exactly() {
        let corpus = generate_golden_corpus(GOLDEN_CORPUS_SEED);
        let out = apply_denoise(&corpus.trajectories, &golden_config()).unwrap();
        let mut verdicts: std::collections::BTreeMap<&str, (Category, Disposition)> =
            corpus
                .trajectories
                .iter()
                .map(|t| (t.id.as_str(), (Category::Clean, Disposition::Keep)))
                .collect();
        for entry in &out.audit.entries {
            verdicts.insert(
                corpus
                    .trajectories
                    .iter()
                    .find(|t| t.id == entry.id)
                    .unwrap()
                    .id
                    .as_str(),
                (entry.category, entry.disposition),
            );
        }
        for expected in &corpus.expected {
            let got = verdicts[expected.id.as_str()];
            assert_eq!(
                got,
                (expected.category, expected.disposition),
                "trajectory {}",
                expected.id
            );
        }
    }
}
