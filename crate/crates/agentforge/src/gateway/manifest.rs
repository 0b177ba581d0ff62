use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest does not match the expected schema: {0}")]
    SchemaInvalid(String),
    #[error("manifest i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Accepted parameter value types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Number,
    Bool,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub param_type: ParamType,
    #[serde(default)]
    pub required: bool,
}

/// A registered tool version, loaded from a TOML manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolManifest {
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub param_schema: Vec<ParamSpec>,
    /// Functionally similar tools to try when every instance is down.
    #[serde(default)]
    pub fallbacks: Vec<String>,
    #[serde(default = "default_instance_count")]
    pub instance_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit_qps: Option<f64>,
}

fn default_instance_count() -> usize {
    1
}

impl ToolManifest {
    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let manifest: ToolManifest =
            toml::from_str(text).map_err(|e| ManifestError::SchemaInvalid(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, ManifestError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ManifestError> {
        if self.name.is_empty() {
            return Err(ManifestError::SchemaInvalid("name must be non-empty".into()));
        }
        if parse_semver(&self.version).is_none() {
            return Err(ManifestError::SchemaInvalid(format!(
                "version {:?} is not a semver triple",
                self.version
            )));
        }
        if self.instance_count < 1 {
            return Err(ManifestError::SchemaInvalid(
                "instance_count must be >= 1".into(),
            ));
        }
        if let Some(qps) = self.rate_limit_qps {
            if !(qps > 0.0) {
                return Err(ManifestError::SchemaInvalid(
                    "rate_limit_qps must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Validate request params against the declared schema.
    pub fn check_params(
        &self,
        params: &BTreeMap<String, serde_json::Value>,
    ) -> Result<(), String> {
        for spec in &self.param_schema {
            match params.get(&spec.name) {
                None if spec.required => {
                    return Err(format!("missing required param {:?}", spec.name))
                }
                None => {}
                Some(value) => {
                    let ok = match spec.param_type {
                        ParamType::String => value.is_string(),
                        ParamType::Number => value.is_number(),
                        ParamType::Bool => value.is_boolean(),
                        ParamType::Any => true,
                    };
                    if !ok {
                        return Err(format!(
                            "param {:?} has wrong type (expected {:?})",
                            spec.name, spec.param_type
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse an `x.y.z` semver triple for ordering; pre-release tags are not
/// supported.
pub fn parse_semver(version: &str) -> Option<(u64, u64, u64)> {
    let mut parts = version.split('.');
    let major = parts.next()?.parse().ok()?;
    let minor = parts.next()?.parse().ok()?;
    let patch = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((major, minor, patch))
}
