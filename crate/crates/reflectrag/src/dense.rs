//! Exact dot-product vector retrieval, the dense pathway.
//!
//! A flat scan over all stored vectors: exactness keeps oracle tests strict
//! and desk-scale corpora make approximate structures unnecessary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fusion::RankedList;

const FORMAT_TAG: &str = "reflectrag-dense";
const FORMAT_VERSION: u32 = 1;

/// Supplies embedding vectors for texts, order-preserving, one vector of
/// length `dim` per input.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Row-per-passage embedding matrix aligned with corpus order.
#[derive(Debug, Serialize, Deserialize)]
pub struct DenseIndex {
    dim: usize,
    vectors: Vec<Vec<f64>>,
    ids: Vec<String>,
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Reads a `{"id", "vector"}` JSONL file into an id-keyed map, checking
/// dimensional consistency.
fn read_embeddings_file(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut map = HashMap::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: display.clone(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: rec.vector.len(),
                })
            }
            _ => {}
        }
        map.insert(rec.id, rec.vector);
    }
    Ok(map)
}

/// Builds the index from a precomputed embeddings file. Every corpus id must
/// appear exactly once; surplus ids are rejected.
pub fn build_dense_index_from_file(corpus: &Corpus, path: &Path) -> Result<DenseIndex> {
    let mut by_id = read_embeddings_file(path)?;
    let mut vectors = Vec::with_capacity(corpus.len());
    let mut ids = Vec::with_capacity(corpus.len());
    for passage in corpus.passages() {
        let v = by_id
            .remove(&passage.id)
            .ok_or_else(|| Error::MissingEmbedding {
                id: passage.id.clone(),
            })?;
        vectors.push(v);
        ids.push(passage.id.clone());
    }
    if let Some(id) = by_id.into_keys().next() {
        return Err(Error::UnknownEmbeddingId { id });
    }
    let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
    Ok(DenseIndex { dim, vectors, ids })
}

/// Builds the index by embedding every passage text through `provider`.
pub fn build_dense_index_from_provider(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<DenseIndex> {
    let texts: Vec<String> = corpus.passages().iter().map(|p| p.text.clone()).collect();
    let vectors = provider.embed(&texts)?;
    if vectors.len() != corpus.len() {
        return Err(Error::Backend(format!(
            "provider returned {} vectors for {} passages",
            vectors.len(),
            corpus.len()
        )));
    }
    let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
    for v in &vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let ids = corpus.passages().iter().map(|p| p.id.clone()).collect();
    Ok(DenseIndex { dim, vectors, ids })
}

impl DenseIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Top-k by dot product, descending; ties broken by ascending passage id.
    pub fn search(&self, query: &[f64], k: usize) -> Result<RankedList> {
        if !self.is_empty() && query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if k == 0 {
            return Ok(RankedList::new());
        }
        let scored: Vec<(String, f64)> = self
            .vectors
            .iter()
            .zip(&self.ids)
            .map(|(v, id)| {
                let dot = v.iter().zip(query).map(|(a, b)| a * b).sum::<f64>();
                (id.clone(), dot)
            })
            .collect();
        let mut ranked = RankedList::from_scored(scored);
        ranked.truncate(k);
        Ok(ranked)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let envelope = serde_json::json!({
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "index": self,
        });
        serde_json::to_writer(BufWriter::new(file), &envelope)
            .map_err(|e| Error::IndexFormat(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let envelope: serde_json::Value = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::IndexFormat(e.to_string()))?;
        if envelope["format"] != FORMAT_TAG {
            return Err(Error::IndexFormat("unrecognized dense index file".into()));
        }
        if envelope["version"] != FORMAT_VERSION {
            return Err(Error::IndexFormat(format!(
                "unsupported dense index version {}",
                envelope["version"]
            )));
        }
        serde_json::from_value(envelope["index"].clone())
            .map_err(|e| Error::IndexFormat(e.to_string()))
    }
}
