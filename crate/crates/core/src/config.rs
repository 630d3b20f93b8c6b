//! Run configuration: one TOML file, unknown keys rejected, validated on load.

use std::env;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingProvider, FileProvider, SyntheticProvider};
use crate::geometry::GridSpec;
use crate::map::{IntegrationOptions, MapParams};
use crate::nav::NavConfig;
use crate::obstacle::EmbodimentProfile;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "VLMAP_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    pub seed: u64,
    /// Synthetic prototype noise.
    pub noise: f64,
    /// Provider id recorded in frames; file provider only.
    pub id: Option<String>,
    /// Label embedding matrix; file provider only.
    pub matrix: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { provider: ProviderKind::Synthetic, dim: 32, seed: 0, noise: 0.0, id: None, matrix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub suites: Vec<PathBuf>,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { suites: Vec::new(), jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub map: MapParams,
    pub integration: IntegrationOptions,
    pub embedding: EmbeddingConfig,
    pub navigation: NavConfig,
    pub bench: BenchConfig,
    /// Extra embodiment profiles, looked up by name before the built-ins.
    pub profiles: Vec<EmbodimentProfile>,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let c: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text, path)
    }

    /// `explicit`, else the file named by `VLMAP_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit.map(Path::to_path_buf).or_else(|| env::var_os(CONFIG_ENV).map(PathBuf::from)) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.map;
        GridSpec::new(m.scale as f64, m.rows, m.cols).map_err(|e| ConfigError::Invalid(format!("map: {e}")))?;
        if !(m.t1.is_finite() && m.t2.is_finite() && m.t1 <= m.t2) {
            return Err(ConfigError::Invalid(format!("map: height band [{}, {}] is empty", m.t1, m.t2)));
        }
        if !(self.integration.max_depth > 0.0) || self.integration.stride == 0 {
            return Err(ConfigError::Invalid("integration: max_depth and stride must be positive".into()));
        }
        let e = &self.embedding;
        if e.dim == 0 {
            return Err(ConfigError::Invalid("embedding: dim must be positive".into()));
        }
        if !(e.noise.is_finite() && e.noise >= 0.0) {
            return Err(ConfigError::Invalid("embedding: noise must be non-negative".into()));
        }
        if e.provider == ProviderKind::File && e.id.is_none() {
            return Err(ConfigError::Invalid("embedding: the file provider needs an id".into()));
        }
        let n = &self.navigation;
        if !(n.offset_dist.is_finite() && n.offset_dist >= 0.0 && n.goal_tolerance >= 0.0) {
            return Err(ConfigError::Invalid("navigation: distances must be non-negative".into()));
        }
        if self.bench.jobs == 0 {
            return Err(ConfigError::Invalid("bench: jobs must be at least 1".into()));
        }
        for p in &self.profiles {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Option<EmbodimentProfile> {
        self.profiles.iter().find(|p| p.name == name).cloned().or_else(|| EmbodimentProfile::builtin(name))
    }

    pub fn synthetic_provider(&self) -> Result<SyntheticProvider, ConfigError> {
        let e = &self.embedding;
        Ok(SyntheticProvider::new(e.dim, e.seed)?.with_noise(e.noise))
    }

    /// Provider for label embeddings. A synthetic provider is rebuilt from
    /// the map's provider id when it names one, so the two always agree.
    pub fn label_provider(&self, map_provider_id: Option<&str>) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
        let e = &self.embedding;
        match e.provider {
            ProviderKind::Synthetic => match map_provider_id {
                Some(id) if id.starts_with("synthetic:") => Ok(Box::new(SyntheticProvider::from_id(id)?)),
                _ => Ok(Box::new(self.synthetic_provider()?)),
            },
            ProviderKind::File => {
                let id = map_provider_id.map(str::to_string).or_else(|| e.id.clone()).unwrap_or_default();
                Ok(Box::new(FileProvider::new(id, e.dim, e.matrix.clone())))
            }
        }
    }
}
