//! Name-keyed backend registry.
//!
//! Each backend family (generator, verifier, embedder) is a set of
//! interchangeable strategies behind a common trait. Strategies register
//! under a kind name and are selected at runtime from config or CLI flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use crate::config::{BackendSection, RetrySection};
use crate::dense::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::generation::GeneratorBackend;
use crate::reflection::VerifierBackend;

use super::http::{ChatGenerator, HttpEmbedder, LlmNliVerifier, NliEndpointVerifier, RetryPolicy};
use super::mock::{HashedEmbedder, PrecomputedOnlyEmbedder, ScriptedGenerator, ScriptedVerifier};

/// Everything a builder may need: the backend's config section, the retry
/// policy, and the mock directory when `--mock-backends` is set.
pub struct BuildContext<'a> {
    pub section: &'a BackendSection,
    pub retry: &'a RetrySection,
    pub mock_dir: Option<&'a PathBuf>,
}

impl BuildContext<'_> {
    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.retry.attempts,
            base_delay_ms: self.retry.base_delay_ms,
        }
    }

    fn endpoint(&self, family: &str) -> Result<String> {
        self.section.endpoint.clone().ok_or_else(|| {
            Error::Config(format!("backends.{family}.endpoint is required for this kind"))
        })
    }

    fn model(&self) -> String {
        self.section.model.clone().unwrap_or_default()
    }

    fn mock_file(&self, name: &str) -> Result<PathBuf> {
        let dir = self.mock_dir.ok_or_else(|| {
            Error::Config(format!(
                "scripted backends need --mock-backends (for {name})"
            ))
        })?;
        Ok(dir.join(name))
    }
}

type GeneratorBuilder = fn(&BuildContext) -> Result<Arc<dyn GeneratorBackend>>;
type VerifierBuilder = fn(&BuildContext) -> Result<Arc<dyn VerifierBackend>>;
type EmbedderBuilder = fn(&BuildContext) -> Result<Arc<dyn EmbeddingProvider>>;

pub struct BackendRegistry {
    generators: BTreeMap<&'static str, GeneratorBuilder>,
    verifiers: BTreeMap<&'static str, VerifierBuilder>,
    embedders: BTreeMap<&'static str, EmbedderBuilder>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut registry = BackendRegistry {
            generators: BTreeMap::new(),
            verifiers: BTreeMap::new(),
            embedders: BTreeMap::new(),
        };

        registry.register_generator("http", |ctx| {
            Ok(Arc::new(ChatGenerator::new(
                ctx.endpoint("generator")?,
                ctx.model(),
                0.0,
                ctx.retry_policy(),
            )))
        });
        registry.register_generator("scripted", |ctx| {
            Ok(Arc::new(ScriptedGenerator::load(
                &ctx.mock_file("generator.jsonl")?,
            )?))
        });

        registry.register_verifier("nli_endpoint", |ctx| {
            Ok(Arc::new(NliEndpointVerifier::new(
                ctx.endpoint("verifier")?,
                ctx.retry_policy(),
            )))
        });
        registry.register_verifier("llm_as_nli", |ctx| {
            let chat = ChatGenerator::new(
                ctx.endpoint("verifier")?,
                ctx.model(),
                0.0,
                ctx.retry_policy(),
            );
            Ok(Arc::new(LlmNliVerifier::new(chat)))
        });
        registry.register_verifier("scripted", |ctx| {
            Ok(Arc::new(ScriptedVerifier::load(
                &ctx.mock_file("verifier.jsonl")?,
            )?))
        });

        registry.register_embedder("http", |ctx| {
            Ok(Arc::new(HttpEmbedder::new(
                ctx.endpoint("embedder")?,
                ctx.model(),
                ctx.retry_policy(),
            )))
        });
        registry.register_embedder("hashed", |ctx| {
            let dim = ctx.section.dim.ok_or_else(|| {
                Error::Config("backends.embedder.dim is required for kind \"hashed\"".into())
            })?;
            Ok(Arc::new(HashedEmbedder::new(dim)?))
        });
        registry.register_embedder("precomputed_only", |_ctx| {
            Ok(Arc::new(PrecomputedOnlyEmbedder))
        });

        registry
    }
}

impl BackendRegistry {
    pub fn register_generator(&mut self, name: &'static str, builder: GeneratorBuilder) {
        self.generators.insert(name, builder);
    }

    pub fn register_verifier(&mut self, name: &'static str, builder: VerifierBuilder) {
        self.verifiers.insert(name, builder);
    }

    pub fn register_embedder(&mut self, name: &'static str, builder: EmbedderBuilder) {
        self.embedders.insert(name, builder);
    }

    pub fn generator_kinds(&self) -> Vec<&'static str> {
        self.generators.keys().copied().collect()
    }

    pub fn verifier_kinds(&self) -> Vec<&'static str> {
        self.verifiers.keys().copied().collect()
    }

    pub fn embedder_kinds(&self) -> Vec<&'static str> {
        self.embedders.keys().copied().collect()
    }

    pub fn build_generator(&self, kind: &str, ctx: &BuildContext) -> Result<Arc<dyn GeneratorBackend>> {
        let builder = self.generators.get(kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown generator kind {kind:?}; known kinds: {:?}",
                self.generator_kinds()
            ))
        })?;
        builder(ctx)
    }

    pub fn build_verifier(&self, kind: &str, ctx: &BuildContext) -> Result<Arc<dyn VerifierBackend>> {
        let builder = self.verifiers.get(kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown verifier kind {kind:?}; known kinds: {:?}",
                self.verifier_kinds()
            ))
        })?;
        builder(ctx)
    }

    pub fn build_embedder(&self, kind: &str, ctx: &BuildContext) -> Result<Arc<dyn EmbeddingProvider>> {
        let builder = self.embedders.get(kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown embedder kind {kind:?}; known kinds: {:?}",
                self.embedder_kinds()
            ))
        })?;
        builder(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BackendSection, RetrySection};

    fn ctx<'a>(section: &'a BackendSection, retry: &'a RetrySection) -> BuildContext<'a> {
        BuildContext {
            section,
            retry,
            mock_dir: None,
        }
    }

    #[test]
    fn known_kinds_listed() {
        let registry = BackendRegistry::default();
        assert_eq!(registry.generator_kinds(), ["http", "scripted"]);
        assert_eq!(
            registry.verifier_kinds(),
            ["llm_as_nli", "nli_endpoint", "scripted"]
        );
        assert_eq!(
            registry.embedder_kinds(),
            ["hashed", "http", "precomputed_only"]
        );
    }

    #[test]
    fn unknown_kind_is_an_error_naming_candidates() {
        let registry = BackendRegistry::default();
        let section = BackendSection::default();
        let retry = RetrySection::default();
        let err = match registry.build_generator("nope", &ctx(&section, &retry)) {
            Err(e) => e,
            Ok(_) => panic!("unknown kind built"),
        };
        assert!(err.to_string().contains("http"), "{err}");
    }

    #[test]
    fn http_generator_requires_endpoint() {
        let registry = BackendRegistry::default();
        let section = BackendSection::default();
        let retry = RetrySection::default();
        assert!(registry
            .build_generator("http", &ctx(&section, &retry))
            .is_err());
    }

    #[test]
    fn hashed_embedder_requires_dim() {
        let registry = BackendRegistry::default();
        let retry = RetrySection::default();
        let mut section = BackendSection::default();
        assert!(registry
            .build_embedder("hashed", &ctx(&section, &retry))
            .is_err());
        section.dim = Some(8);
        assert!(registry
            .build_embedder("hashed", &ctx(&section, &retry))
            .is_ok());
    }

    #[test]
    fn scripted_without_mock_dir_fails() {
        let registry = BackendRegistry::default();
        let section = BackendSection::default();
        let retry = RetrySection::default();
        let err = match registry.build_verifier("scripted", &ctx(&section, &retry)) {
            Err(e) => e,
            Ok(_) => panic!("scripted verifier built without mock dir"),
        };
        assert!(err.to_string().contains("mock-backends"), "{err}");
    }
}
