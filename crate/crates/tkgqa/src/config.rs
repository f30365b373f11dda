//! Runtime configuration: retrieval and memory knobs, backend selection,
//! and data paths. Defaults are the reference values; a TOML file and CLI
//! flags override them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::memory::MemoryConfig;
use crate::retrieval::RetrievalConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// Reasoner backend settings. Temperatures follow the reference setup:
/// 0.4 while exploring evidence, 0.0 for final answer generation, 256
/// tokens maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Rules file for the scripted backend.
    pub rules: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
    pub temperature_explore: f32,
    pub temperature_answer: f32,
    pub max_tokens: u32,
    /// Upper bound on concurrent HTTP requests.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            rules: None,
            endpoint: None,
            model: None,
            api_key_env: "TKGQA_API_KEY".to_string(),
            temperature_explore: 0.4,
            temperature_answer: 0.0,
            max_tokens: 256,
            max_in_flight: 4,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub tkg: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub memory: Option<PathBuf>,
    pub cold_start: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    pub link_threshold: f64,
    /// JSON embedding endpoint; unset means the bundled hash embedder.
    pub endpoint: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dimension: crate::embedding::HASH_EMBEDDER_DIM,
            link_threshold: crate::embedding::DEFAULT_LINK_THRESHOLD,
            endpoint: None,
        }
    }
}

/// Pipeline stages that can be disabled for ablation runs.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    pub no_tree: bool,
    pub no_memory: bool,
    pub no_graph_retrieval: bool,
    pub no_embed_retrieval: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub retrieval: RetrievalConfig,
    pub memory: MemoryConfig,
    pub backend: BackendConfig,
    pub embedding: EmbeddingConfig,
    pub paths: PathsConfig,
    pub ablations: Ablations,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.retrieval.validate().map_err(ConfigError::Invalid)?;
        if self.memory.buffer_capacity == 0 {
            return Err(ConfigError::Invalid("buffer_capacity must be at least 1".into()));
        }
        if (self.memory.lambda_sim + self.memory.lambda_hit - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(
                "lambda_sim + lambda_hit must equal 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.memory.decay) || self.memory.decay == 0.0 {
            return Err(ConfigError::Invalid("decay must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_reference_values() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.retrieval.d_max, 3);
        assert_eq!(cfg.retrieval.w_max, 3);
        assert_eq!(cfg.retrieval.w1, 80);
        assert!((cfg.retrieval.lambda_sem - 0.6).abs() < 1e-12);
        assert!((cfg.memory.lambda_sim - 0.6).abs() < 1e-12);
        assert!((cfg.memory.lambda_hit - 0.4).abs() < 1e-12);
        assert_eq!(cfg.memory.w_exp, 10);
        assert_eq!(cfg.memory.buffer_capacity, 200);
        assert!((cfg.backend.temperature_explore - 0.4).abs() < 1e-6);
        assert_eq!(cfg.backend.temperature_answer, 0.0);
        assert_eq!(cfg.backend.max_tokens, 256);
    }

    #[test]
    fn weight_invariants_enforced() {
        let mut cfg = Config::default();
        cfg.retrieval.lambda_prox = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.memory.lambda_hit = 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.retrieval.w1, cfg.retrieval.w1);
    }
}
