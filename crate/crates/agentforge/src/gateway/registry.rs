use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::manifest::{parse_semver, ManifestError, ToolManifest};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("tool {name} version {version} is already registered")]
    DuplicateVersion { name: String, version: String },
    #[error(transparent)]
    SchemaInvalid(#[from] ManifestError),
}

/// Versioned tool registry. Multiple versions of a tool coexist; lookups
/// without an explicit version resolve to the highest semver.
///
/// The registry is immutable after construction; the gateway swaps whole
/// snapshots rather than mutating in place.
#[derive(Debug, Default, Clone)]
pub struct ToolRegistry {
    by_name: BTreeMap<String, BTreeMap<(u64, u64, u64), ToolManifest>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, manifest: ToolManifest) -> Result<(), RegistryError> {
        let key = parse_semver(&manifest.version).expect("validated on parse");
        let versions = self.by_name.entry(manifest.name.clone()).or_default();
        if versions.contains_key(&key) {
            return Err(RegistryError::DuplicateVersion {
                name: manifest.name,
                version: manifest.version,
            });
        }
        versions.insert(key, manifest);
        Ok(())
    }

    /// Load every `*.toml` manifest from a registry directory.
    pub fn from_dir<P: AsRef<Path>>(dir: P) -> Result<Self, RegistryError> {
        let mut registry = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(ManifestError::Io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            registry.register(ToolManifest::from_file(&path)?)?;
        }
        Ok(registry)
    }

    /// Resolve a tool by name and optional exact version.
    pub fn resolve(&self, name: &str, version: Option<&str>) -> Option<&ToolManifest> {
        let versions = self.by_name.get(name)?;
        match version {
            Some(v) => versions.get(&parse_semver(v)?),
            None => versions.values().next_back(),
        }
    }

    pub fn tools(&self) -> impl Iterator<Item = &ToolManifest> {
        self.by_name.values().flat_map(|versions| versions.values())
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}
