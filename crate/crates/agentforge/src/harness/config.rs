//! Unified TOML run configuration.
//!
//! One document carries a section per subcommand plus the global knobs.
//! Every field has a default matching the owning module, unknown keys are
//! rejected with a nearest-known-key suggestion, and the effective
//! (fully-defaulted) config is echoed back for audit logs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoise::DenoiseConfig;
use crate::gateway::{GatewayConfig, LayeredDeadlines, SchedulingStrategy};
use crate::orchestrator::OrchestratorConfig;
use crate::sim::MockPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown key {key:?}{}", suggestion.as_ref().map(|s| format!(" (did you mean {s:?}?)")).unwrap_or_default())]
    UnknownKey {
        key: String,
        suggestion: Option<String>,
    },
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSection {
    pub lambda: f64,
    pub density: f64,
    pub epsilon: f64,
    /// `task_vector` or `base_minus_tuned`.
    pub sign_convention: String,
    /// Per-source weights; empty means uniform 1.0.
    pub weights: Vec<f64>,
}

impl Default for MergeSection {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            density: 1.0,
            epsilon: 1e-8,
            sign_convention: "task_vector".into(),
            weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub strategy: String,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub tool_deadline_ms: u64,
    pub server_deadline_ms: u64,
    pub client_deadline_ms: u64,
    pub content_cap_tokens: usize,
    pub health_failure_threshold: u32,
    pub health_cooldown_ms: u64,
    pub registry_dir: PathBuf,
    pub port: u16,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            strategy: "round_robin".into(),
            max_attempts: 3,
            backoff_base_ms: 1000,
            tool_deadline_ms: 110_000,
            server_deadline_ms: 120_000,
            client_deadline_ms: 180_000,
            content_cap_tokens: 95_000,
            health_failure_threshold: 3,
            health_cooldown_ms: 30_000,
            registry_dir: "registry".into(),
            port: 8080,
        }
    }
}

impl GatewaySection {
    pub fn to_config(&self) -> Result<GatewayConfig, ConfigError> {
        let strategy = match self.strategy.as_str() {
            "round_robin" => SchedulingStrategy::RoundRobin,
            "least_load" => SchedulingStrategy::LeastLoad,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown scheduling strategy {other:?}"
                )))
            }
        };
        let deadlines = LayeredDeadlines::new(
            self.tool_deadline_ms,
            self.server_deadline_ms,
            self.client_deadline_ms,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(GatewayConfig {
            strategy,
            max_attempts: self.max_attempts,
            backoff_base_ms: self.backoff_base_ms,
            deadlines,
            content_cap_tokens: self.content_cap_tokens,
            health_failure_threshold: self.health_failure_threshold,
            health_cooldown_ms: self.health_cooldown_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scheduler: String,
    pub latency: String,
    pub steps: usize,
    pub concurrency: usize,
    pub window: usize,
    pub ma_span: usize,
    pub passk_p: f64,
    pub passk_n: u64,
    pub passk_grid: Vec<u64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            scheduler: "async".into(),
            latency: "lognormal:3,1.2".into(),
            steps: 1000,
            concurrency: 8,
            window: 10,
            ma_span: 5,
            passk_p: 0.2,
            passk_n: 64,
            passk_grid: vec![1, 2, 4, 8, 16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// JSONL dataset path; empty means "must be given on the command line".
    pub dataset: PathBuf,
    pub n_samples: u64,
    pub k_grid: Vec<u64>,
    pub parallelism: usize,
    pub policy: MockPolicy,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            n_samples: 1,
            k_grid: vec![1],
            parallelism: 4,
            policy: MockPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub log_level: String,
    pub merge: MergeSection,
    pub denoise: DenoiseConfig,
    pub gateway: GatewaySection,
    pub orchestrate: OrchestratorConfig,
    pub simulate: SimulateSection,
    pub eval: EvalSection,
}

impl RunConfig {
    fn base_default() -> Self {
        Self {
            seed: 0,
            output_dir: "out".into(),
            log_level: "info".into(),
            ..Default::default()
        }
    }

    /// Render the fully-defaulted effective configuration for audit logs.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.denoise
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.eval
            .policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.gateway.to_config()?;
        self.orchestrate
            .off_policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eval.parallelism == 0 {
            return Err(ConfigError::Invalid("eval.parallelism must be >= 1".into()));
        }
        Ok(())
    }
}

/// Edit distance used for unknown-key suggestions.
fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut row = vec![i + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            row.push(sub.min(prev[j + 1] + 1).min(row[j] + 1));
        }
        prev = row;
    }
    prev[b.len()]
}

/// Check every key in `value` against the keys the defaulted config
/// serializes; the default document enumerates every known field.
fn check_unknown_keys(
    value: &toml::Value,
    reference: &toml::Value,
    path: &str,
) -> Result<(), ConfigError> {
    let (Some(table), Some(known)) = (value.as_table(), reference.as_table()) else {
        return Ok(());
    };
    for (key, sub) in table {
        match known.get(key) {
            Some(ref_sub) => {
                let sub_path = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                check_unknown_keys(sub, ref_sub, &sub_path)?;
            }
            None => {
                let full = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                let suggestion = known
                    .keys()
                    .map(|k| (levenshtein(key, k), k))
                    .min()
                    .filter(|(d, _)| *d <= 2)
                    .map(|(_, k)| k.clone());
                return Err(ConfigError::UnknownKey {
                    key: full,
                    suggestion,
                });
            }
        }
    }
    Ok(())
}

/// Parse a config document, applying defaults and rejecting unknown keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let reference = toml::Value::try_from(RunConfig::base_default())
        .expect("default config converts to a TOML value");
    check_unknown_keys(&value, &reference, "")?;
    let mut config: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if config.output_dir.as_os_str().is_empty() {
        config.output_dir = "out".into();
    }
    if config.log_level.is_empty() {
        config.log_level = "info".into();
    }
    config.validate()?;
    Ok(config)
}

/// Load a config file. `AGENTFORGE_SEED`, when set, overrides the seed.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<RunConfig, ConfigError> {
    let mut config = parse_config(&std::fs::read_to_string(path)?)?;
    if let Ok(seed) = std::env::var("AGENTFORGE_SEED") {
        config.seed = seed
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("AGENTFORGE_SEED {seed:?} is not a u64")))?;
    }
    Ok(config)
}

/// Documented default-constants table: every knob the config exposes, with
/// the default it ships with. The tests pin this table against the live
/// `Default` implementations so a drifting default must be re-documented.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("output_dir", "\"out\""),
    ("log_level", "\"info\""),
    ("merge.lambda", "0.9"),
    ("merge.density", "1.0"),
    ("merge.epsilon", "1e-8"),
    ("merge.sign_convention", "\"task_vector\""),
    ("merge.weights", "[]"),
    ("denoise.timeout_ms", "120000"),
    ("denoise.env_status_codes", "[500, 502, 503, 504]"),
    ("denoise.latency_anomaly_z", "4.0"),
    ("denoise.l_min", "3"),
    ("denoise.l_max", "64"),
    ("denoise.neutral_reward", "0.5"),
    ("denoise.env_action", "\"neutralize\""),
    ("gateway.strategy", "\"round_robin\""),
    ("gateway.max_attempts", "3"),
    ("gateway.backoff_base_ms", "1000"),
    ("gateway.tool_deadline_ms", "110000"),
    ("gateway.server_deadline_ms", "120000"),
    ("gateway.client_deadline_ms", "180000"),
    ("gateway.content_cap_tokens", "95000"),
    ("gateway.health_failure_threshold", "3"),
    ("gateway.health_cooldown_ms", "30000"),
    ("gateway.registry_dir", "\"registry\""),
    ("gateway.port", "8080"),
    ("orchestrate.sampler_count", "4"),
    ("orchestrate.target_concurrency", "8"),
    ("orchestrate.batch_size", "8"),
    ("orchestrate.off_policy.max_staleness", "2"),
    ("orchestrate.off_policy.clip_c", "5.0"),
    ("orchestrate.train_batches", "4"),
    ("orchestrate.step_latency_ms", "50"),
    ("simulate.scheduler", "\"async\""),
    ("simulate.latency", "\"lognormal:3,1.2\""),
    ("simulate.steps", "1000"),
    ("simulate.concurrency", "8"),
    ("simulate.window", "10"),
    ("simulate.ma_span", "5"),
    ("simulate.passk_p", "0.2"),
    ("simulate.passk_n", "64"),
    ("simulate.passk_grid", "[1, 2, 4, 8, 16, 32, 64]"),
    ("eval.dataset", "\"\""),
    ("eval.n_samples", "1"),
    ("eval.k_grid", "[1]"),
    ("eval.parallelism", "4"),
    ("eval.policy.success_prob", "0.5"),
    ("eval.policy.steps_min", "3"),
    ("eval.policy.steps_max", "6"),
    ("eval.policy.format_error_prob", "0.0"),
    ("eval.policy.seed", "0"),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn lookup<'v>(root: &'v toml::Value, path: &str) -> &'v toml::Value {
        path.split('.').fold(root, |v, key| {
            v.as_table()
                .and_then(|t| t.get(key))
                .unwrap_or_else(|| panic!("missing key {path}"))
        })
    }

    fn render(value: &toml::Value) -> String {
        match value {
            toml::Value::String(s) => format!("{s:?}"),
            toml::Value::Float(f) => {
                // Match the table's human-friendly literals.
                if *f == 1e-8 {
                    "1e-8".to_string()
                } else {
                    format!("{f:?}")
                }
            }
            toml::Value::Array(items) => {
                let inner: Vec<String> = items.iter().map(render).collect();
                format!("[{}]", inner.join(", "))
            }
            other => other.to_string(),
        }
    }

    #[test]
    fn defaults_table_matches_live_defaults() {
        let root = toml::Value::try_from(RunConfig::base_default()).unwrap();
        for (path, documented) in DEFAULTS {
            assert_eq!(
                render(lookup(&root, path)),
                *documented,
                "default for {path} drifted from the documented table"
            );
        }
    }

    fn leaf_paths(value: &toml::Value, prefix: &str, out: &mut Vec<String>) {
        match value.as_table() {
            Some(table) => {
                for (key, sub) in table {
                    let path = if prefix.is_empty() {
                        key.clone()
                    } else {
                        format!("{prefix}.{key}")
                    };
                    leaf_paths(sub, &path, out);
                }
            }
            None => out.push(prefix.to_string()),
        }
    }

    #[test]
    fn defaults_table_is_complete() {
        let root = toml::Value::try_from(RunConfig::base_default()).unwrap();
        let mut paths = Vec::new();
        leaf_paths(&root, "", &mut paths);
        let documented: Vec<&str> = DEFAULTS.iter().map(|(p, _)| *p).collect();
        for path in &paths {
            assert!(documented.contains(&path.as_str()), "{path} undocumented");
        }
        assert_eq!(paths.len(), documented.len());
    }

    #[test]
    fn minimal_config_echoes_all_defaults() {
        let config = parse_config("seed = 7\n").unwrap();
        assert_eq!(config.seed, 7);
        let echo = config.echo();
        for (path, _) in DEFAULTS {
            let key = path.rsplit('.').next().unwrap();
            assert!(echo.contains(key), "echo is missing {key}");
        }
        assert_eq!(config.merge.lambda, 0.9);
        assert_eq!(config.merge.density, 1.0);
    }

    #[test]
    fn typo_gets_a_suggestion() {
        let err = parse_config("[merge]\nlamda = 0.5\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key, suggestion } => {
                assert_eq!(key, "merge.lamda");
                assert_eq!(suggestion.as_deref(), Some("lambda"));
            }
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn far_off_keys_get_no_suggestion() {
        let err = parse_config("completely_wrong = 1\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { suggestion, .. } => assert_eq!(suggestion, None),
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn syntax_errors_surface_line_info() {
        let err = parse_config("seed = = 1\n").unwrap_err();
        match err {
            ConfigError::Parse(message) => {
                assert!(message.contains("line 1"), "{message}")
            }
            other => panic!("expected Parse, got {other}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            parse_config("[gateway]\nstrategy = \"fastest\"\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            parse_config("[eval]\nparallelism = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn gateway_section_matches_module_defaults() {
        let section = GatewaySection::default();
        let config = section.to_config().unwrap();
        let module = GatewayConfig::default();
        assert_eq!(config.max_attempts, module.max_attempts);
        assert_eq!(config.backoff_base_ms, module.backoff_base_ms);
        assert_eq!(config.deadlines, module.deadlines);
        assert_eq!(config.content_cap_tokens, module.content_cap_tokens);
        assert_eq!(
            config.health_failure_threshold,
            module.health_failure_threshold
        );
        assert_eq!(config.health_cooldown_ms, module.health_cooldown_ms);
    }
}
