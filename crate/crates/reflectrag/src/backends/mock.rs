//! Scripted backends for deterministic, offline runs.
//!
//! Scripts are JSONL files keyed by content hashes. A literal `"*"` hash
//! acts as a wildcard fallback, which keeps fixtures small when every
//! request should get the same canned response.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::dense::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::generation::GeneratorBackend;
use crate::reflection::{NliLabel, VerifierBackend};

pub const WILDCARD: &str = "*";

/// Hex SHA-256 of a text, the key space for scripted verifier entries.
pub fn text_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_string(&hasher.finalize())
}

/// Hex SHA-256 over a chat request's message contents, the key space for
/// scripted generator entries.
pub fn prompt_hash(system: &str, user: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system.as_bytes());
    hasher.update([0x1e]);
    hasher.update(user.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Generator replaying canned completions keyed on prompt hash.
#[derive(Debug, Default)]
pub struct ScriptedGenerator {
    completions: HashMap<String, String>,
}

#[derive(Deserialize)]
struct GeneratorRecord {
    hash: String,
    completion: String,
}

impl ScriptedGenerator {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        ScriptedGenerator {
            completions: entries.into_iter().collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut completions = HashMap::new();
        for (lineno, line) in read_jsonl(path)? {
            let rec: GeneratorRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: lineno,
                    detail: e.to_string(),
                })?;
            completions.insert(rec.hash, rec.completion);
        }
        Ok(ScriptedGenerator { completions })
    }
}

impl GeneratorBackend for ScriptedGenerator {
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        let hash = prompt_hash(system, user);
        let completion = self
            .completions
            .get(&hash)
            .or_else(|| self.completions.get(WILDCARD))
            .ok_or(Error::MockMiss { hash })?;
        if completion.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(completion.clone())
    }
}

/// Verifier replaying canned NLI verdicts keyed on (premise, hypothesis)
/// hashes.
#[derive(Debug, Default)]
pub struct ScriptedVerifier {
    verdicts: HashMap<(String, String), (NliLabel, f64)>,
}

#[derive(Deserialize)]
struct VerifierRecord {
    premise_hash: String,
    hypothesis_hash: String,
    label: NliLabel,
    confidence: f64,
}

impl ScriptedVerifier {
    pub fn from_entries(
        entries: impl IntoIterator<Item = ((String, String), (NliLabel, f64))>,
    ) -> Self {
        ScriptedVerifier {
            verdicts: entries.into_iter().collect(),
        }
    }

    /// A verifier answering every pair identically.
    pub fn constant(label: NliLabel, confidence: f64) -> Self {
        Self::from_entries([(
            (WILDCARD.to_string(), WILDCARD.to_string()),
            (label, confidence),
        )])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut verdicts = HashMap::new();
        for (lineno, line) in read_jsonl(path)? {
            let rec: VerifierRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: lineno,
                    detail: e.to_string(),
                })?;
            verdicts.insert(
                (rec.premise_hash, rec.hypothesis_hash),
                (rec.label, rec.confidence),
            );
        }
        Ok(ScriptedVerifier { verdicts })
    }

    fn lookup(&self, premise_hash: &str, hypothesis_hash: &str) -> Option<(NliLabel, f64)> {
        // Exact pair, then wildcard on either side, then full wildcard.
        [
            (premise_hash, hypothesis_hash),
            (premise_hash, WILDCARD),
            (WILDCARD, hypothesis_hash),
            (WILDCARD, WILDCARD),
        ]
        .iter()
        .find_map(|(p, h)| self.verdicts.get(&(p.to_string(), h.to_string())).copied())
    }
}

impl VerifierBackend for ScriptedVerifier {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<(NliLabel, f64)> {
        let ph = text_hash(premise);
        let hh = text_hash(hypothesis);
        self.lookup(&ph, &hh).ok_or(Error::MockMiss {
            hash: format!("({ph}, {hh})"),
        })
    }
}

/// Deterministic synthetic embedder: tokens are hashed into a fixed-size
/// signed-count vector. Not semantically meaningful, but stable across
/// platforms, which is what scripted runs need.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedder dim must be > 0".into()));
        }
        Ok(HashedEmbedder { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in crate::corpus::analyze(text) {
            let digest = Sha256::digest(token.as_bytes());
            let idx = u64::from_le_bytes(digest[..8].try_into().unwrap()) % self.dim as u64;
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[idx as usize] += sign;
        }
        v
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Embedder for precomputed-only deployments: any ask-time embedding
/// request fails with a clear error.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedOnlyEmbedder;

impl EmbeddingProvider for PrecomputedOnlyEmbedder {
    fn embed(&self, _texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Err(Error::NoEmbedder)
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.map(|l| (i + 1, l)).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })
        })
        .collect()
}
