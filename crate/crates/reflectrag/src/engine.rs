//! Assembles corpus, indexes, and backends into a ready-to-ask engine.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backends::{BackendRegistry, BuildContext};
use crate::config::PipelineConfig;
use crate::corpus::{ingest_corpus, Corpus};
use crate::dense::{
    build_dense_index_from_file, build_dense_index_from_provider, DenseIndex, EmbeddingProvider,
};
use crate::error::{Error, Result};
use crate::generation::{GeneratorBackend, Task};
use crate::pipeline::{run_pipeline, PipelineComponents, PipelineResult, PipelineSettings};
use crate::reflection::VerifierBackend;
use crate::sparse::{build_sparse_index, SparseIndex};

pub const SPARSE_INDEX_FILE: &str = "sparse.json";
pub const DENSE_INDEX_FILE: &str = "dense.json";

/// Resolved backend set for one deployment.
pub struct Backends {
    pub generator: Arc<dyn GeneratorBackend>,
    pub verifier: Arc<dyn VerifierBackend>,
    pub embedder: Arc<dyn EmbeddingProvider>,
}

/// Builds the three backends from config through the registry. When
/// `mock_dir` is set, unspecified kinds default to the scripted/synthetic
/// implementations; otherwise to the HTTP ones.
pub fn build_backends(config: &PipelineConfig, mock_dir: Option<&PathBuf>) -> Result<Backends> {
    let registry = BackendRegistry::default();
    let mocked = mock_dir.is_some();

    let default_generator = if mocked { "scripted" } else { "http" };
    let default_verifier = if mocked { "scripted" } else { "nli_endpoint" };
    let default_embedder = if mocked { "hashed" } else { "http" };

    let mut embedder_section = config.backends.embedder.clone();
    if mocked && embedder_section.dim.is_none() {
        embedder_section.dim = Some(16);
    }

    let generator_kind = config
        .backends
        .generator
        .kind
        .as_deref()
        .unwrap_or(default_generator);
    let verifier_kind = config
        .backends
        .verifier
        .kind
        .as_deref()
        .unwrap_or(default_verifier);
    let embedder_kind = embedder_section.kind.as_deref().unwrap_or(default_embedder);

    let generator = registry.build_generator(
        generator_kind,
        &BuildContext {
            section: &config.backends.generator,
            retry: &config.retry,
            mock_dir,
        },
    )?;
    let verifier = registry.build_verifier(
        verifier_kind,
        &BuildContext {
            section: &config.backends.verifier,
            retry: &config.retry,
            mock_dir,
        },
    )?;
    let embedder = registry.build_embedder(
        embedder_kind,
        &BuildContext {
            section: &embedder_section,
            retry: &config.retry,
            mock_dir,
        },
    )?;

    Ok(Backends {
        generator,
        verifier,
        embedder,
    })
}

/// A fully assembled pipeline: immutable corpus and indexes plus backends.
/// Safe for concurrent asks.
pub struct Engine {
    pub corpus: Corpus,
    pub sparse: SparseIndex,
    pub dense: DenseIndex,
    pub backends: Backends,
    pub settings: PipelineSettings,
}

impl Engine {
    /// Builds everything in memory from the configured corpus. Dense
    /// vectors come from the embeddings file when given, otherwise every
    /// passage is embedded through the provider.
    pub fn build(config: &PipelineConfig, mock_dir: Option<&PathBuf>) -> Result<Self> {
        let corpus_path = config
            .paths
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("a corpus path is required (--corpus)".into()))?;
        let corpus = ingest_corpus(corpus_path)?;
        let sparse = build_sparse_index(&corpus, config.sparse.k1, config.sparse.b)?;
        let backends = build_backends(config, mock_dir)?;
        let dense = match &config.paths.embeddings {
            Some(path) => build_dense_index_from_file(&corpus, path)?,
            None => build_dense_index_from_provider(&corpus, backends.embedder.as_ref())?,
        };
        Ok(Engine {
            corpus,
            sparse,
            dense,
            backends,
            settings: config.settings(),
        })
    }

    /// Loads prebuilt index artifacts from the index directory; the corpus
    /// is still read for passage text.
    pub fn load(config: &PipelineConfig, mock_dir: Option<&PathBuf>) -> Result<Self> {
        let corpus_path = config
            .paths
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("a corpus path is required".into()))?;
        let corpus = ingest_corpus(corpus_path)?;
        let sparse = SparseIndex::load(&config.paths.index_dir.join(SPARSE_INDEX_FILE))?;
        let dense = DenseIndex::load(&config.paths.index_dir.join(DENSE_INDEX_FILE))?;
        let backends = build_backends(config, mock_dir)?;
        Ok(Engine {
            corpus,
            sparse,
            dense,
            backends,
            settings: config.settings(),
        })
    }

    /// Persists both index artifacts.
    pub fn save_indexes(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        self.sparse.save(&dir.join(SPARSE_INDEX_FILE))?;
        self.dense.save(&dir.join(DENSE_INDEX_FILE))?;
        Ok(())
    }

    pub fn components(&self) -> PipelineComponents<'_> {
        PipelineComponents {
            corpus: &self.corpus,
            sparse: &self.sparse,
            dense: &self.dense,
            embedder: self.backends.embedder.as_ref(),
            generator: self.backends.generator.as_ref(),
            verifier: self.backends.verifier.as_ref(),
        }
    }

    pub fn ask(
        &self,
        question: &str,
        task: &Task,
        trace: Option<&mut dyn std::io::Write>,
    ) -> Result<PipelineResult> {
        run_pipeline(question, task, &self.components(), &self.settings, trace)
    }
}
