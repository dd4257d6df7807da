//! Declarative configuration: a TOML file with sections, overridden by CLI
//! flags. Flags always win; the file path comes from `--config` or the
//! `REFLECTRAG_CONFIG` environment variable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::PipelineSettings;

pub const CONFIG_ENV_VAR: &str = "REFLECTRAG_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub index_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseConfig {
    pub k1: f64,
    pub b: f64,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            k1: crate::sparse::DEFAULT_K1,
            b: crate::sparse::DEFAULT_B,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSection {
    /// Rank-offset constant of the reciprocal rank sum.
    pub k: f64,
    /// Per-retriever candidate depth.
    pub depth: usize,
    /// Fused context size handed to the generator.
    pub k_out: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            k: 60.0,
            depth: crate::pipeline::DEFAULT_DEPTH,
            k_out: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionSection {
    /// Entailment confidence gate (strict inequality).
    pub tau: f64,
    /// Support score acceptance threshold.
    pub theta: f64,
    pub max_iters: usize,
}

impl Default for ReflectionSection {
    fn default() -> Self {
        ReflectionSection {
            tau: crate::reflection::DEFAULT_TAU,
            theta: crate::reflection::DEFAULT_THETA,
            max_iters: crate::pipeline::DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    pub char_budget: usize,
    pub temperature: f64,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            char_budget: crate::generation::DEFAULT_CONTEXT_CHAR_BUDGET,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendSection {
    /// Backend kind name, resolved through the backend registry.
    pub kind: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Embedder only: vector dimensionality for synthetic providers.
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendsSection {
    pub generator: BackendSection,
    pub verifier: BackendSection,
    pub embedder: BackendSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrySection {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetrySection {
    fn default() -> Self {
        RetrySection {
            attempts: 3,
            base_delay_ms: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub workers: usize,
    pub seed: u64,
    pub n: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            workers: 4,
            seed: 0,
            n: None,
        }
    }
}

/// Aggregated pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub sparse: SparseConfig,
    pub fusion: FusionSection,
    pub reflection: ReflectionSection,
    pub generation: GenerationSection,
    pub backends: BackendsSection,
    pub retry: RetrySection,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reflection.tau) {
            return Err(Error::Config(format!(
                "reflection.tau must be in [0, 1], got {}",
                self.reflection.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.reflection.theta) {
            return Err(Error::Config(format!(
                "reflection.theta must be in [0, 1], got {}",
                self.reflection.theta
            )));
        }
        if self.fusion.k <= 0.0 {
            return Err(Error::Config(format!(
                "fusion.k must be > 0, got {}",
                self.fusion.k
            )));
        }
        if self.reflection.max_iters < 1 {
            return Err(Error::Config("reflection.max_iters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> PipelineSettings {
        PipelineSettings {
            depth: self.fusion.depth,
            k_out: self.fusion.k_out,
            rrf_k: self.fusion.k,
            tau: self.reflection.tau,
            theta: self.reflection.theta,
            max_iters: self.reflection.max_iters,
            char_budget: self.generation.char_budget,
        }
    }

    /// Snapshot embedded in eval reports.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
