//! Okapi BM25 inverted index, the sparse retrieval pathway.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fusion::RankedList;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

const FORMAT_TAG: &str = "reflectrag-sparse";
const FORMAT_VERSION: u32 = 1;

/// Inverted index with Okapi BM25 statistics.
///
/// Postings map each term to `(passage position, term frequency)` pairs
/// sorted by position. Immutable after build; concurrent queries are safe.
#[derive(Debug, Serialize, Deserialize)]
pub struct SparseIndex {
    postings: BTreeMap<String, Vec<(usize, u32)>>,
    doc_len: Vec<u32>,
    avg_doc_len: f64,
    n_docs: usize,
    ids: Vec<String>,
    k1: f64,
    b: f64,
}

/// Builds the index over every passage of `corpus`.
pub fn build_sparse_index(corpus: &Corpus, k1: f64, b: f64) -> Result<SparseIndex> {
    if k1 < 0.0 {
        return Err(Error::InvalidParameter(format!("k1 must be >= 0, got {k1}")));
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidParameter(format!("b must be in [0, 1], got {b}")));
    }

    let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    let mut doc_len = Vec::with_capacity(corpus.len());
    let mut ids = Vec::with_capacity(corpus.len());

    for (pos, passage) in corpus.passages().iter().enumerate() {
        doc_len.push(passage.tokens.len() as u32);
        ids.push(passage.id.clone());
        let mut freqs: BTreeMap<&str, u32> = BTreeMap::new();
        for token in &passage.tokens {
            *freqs.entry(token.as_str()).or_insert(0) += 1;
        }
        for (term, tf) in freqs {
            postings.entry(term.to_string()).or_default().push((pos, tf));
        }
    }

    let n_docs = corpus.len();
    let avg_doc_len = if n_docs > 0 {
        doc_len.iter().map(|&l| l as f64).sum::<f64>() / n_docs as f64
    } else {
        0.0
    };

    Ok(SparseIndex {
        postings,
        doc_len,
        avg_doc_len,
        n_docs,
        ids,
        k1,
        b,
    })
}

impl SparseIndex {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn doc_len(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn postings(&self, term: &str) -> Option<&[(usize, u32)]> {
        self.postings.get(term).map(|v| v.as_slice())
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.n_docs as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_contribution(&self, tf: u32, df: usize, pos: usize) -> f64 {
        let tf = tf as f64;
        let dl = self.doc_len[pos] as f64;
        let norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len);
        self.idf(df) * tf * (self.k1 + 1.0) / (tf + norm)
    }

    /// BM25 score of one passage against a query. Repeated query tokens
    /// count once; terms absent from the passage contribute zero.
    pub fn bm25_score(&self, query_tokens: &[String], pos: usize) -> f64 {
        let mut seen = HashSet::new();
        let mut score = 0.0;
        for term in query_tokens {
            if !seen.insert(term.as_str()) {
                continue;
            }
            if let Some(list) = self.postings.get(term) {
                if let Ok(idx) = list.binary_search_by_key(&pos, |&(p, _)| p) {
                    score += self.term_contribution(list[idx].1, list.len(), pos);
                }
            }
        }
        score
    }

    /// Top-k passages by BM25 score, descending; ties broken by ascending
    /// passage id; zero-score passages excluded.
    pub fn search(&self, query_tokens: &[String], k: usize) -> RankedList {
        if k == 0 || self.n_docs == 0 {
            return RankedList::new();
        }
        let mut seen = HashSet::new();
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for term in query_tokens {
            if !seen.insert(term.as_str()) {
                continue;
            }
            if let Some(list) = self.postings.get(term) {
                let df = list.len();
                for &(pos, tf) in list {
                    *scores.entry(pos).or_insert(0.0) += self.term_contribution(tf, df, pos);
                }
            }
        }
        let scored: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(pos, s)| (self.ids[pos].clone(), s))
            .collect();
        let mut ranked = RankedList::from_scored(scored);
        ranked.truncate(k);
        ranked
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
            return Err(Error::IndexFormat("unrecognized sparse index file".into()));
        }
        if envelope["version"] != FORMAT_VERSION {
            return Err(Error::IndexFormat(format!(
                "unsupported sparse index version {}",
                envelope["version"]
            )));
        }
        serde_json::from_value(envelope["index"].clone())
            .map_err(|e| Error::IndexFormat(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{analyze, Corpus, Passage};

    fn corpus(docs: &[(&str, &str)]) -> Corpus {
        Corpus::from_passages(
            docs.iter()
                .map(|(id, text)| Passage {
                    id: id.to_string(),
                    title: None,
                    text: text.to_string(),
                    tokens: analyze(text),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_corpus_index() {
        let idx = build_sparse_index(&corpus(&[]), DEFAULT_K1, DEFAULT_B).unwrap();
        assert_eq!(idx.n_docs(), 0);
        assert!(idx.search(&analyze("anything"), 5).is_empty());
    }

    #[test]
    fn single_doc_postings() {
        let idx = build_sparse_index(&corpus(&[("d", "a b a")]), DEFAULT_K1, DEFAULT_B).unwrap();
        assert_eq!(idx.postings("a"), Some(&[(0usize, 2u32)][..]));
        assert_eq!(idx.postings("b"), Some(&[(0usize, 1u32)][..]));
        assert_eq!(idx.doc_len(), &[3]);
    }

    #[test]
    fn shared_term_postings_sorted_by_position() {
        let idx =
            build_sparse_index(&corpus(&[("d0", "x y"), ("d1", "x z")]), DEFAULT_K1, DEFAULT_B)
                .unwrap();
        assert_eq!(idx.postings("x"), Some(&[(0usize, 1u32), (1usize, 1u32)][..]));
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let c = corpus(&[("d", "a")]);
        assert!(build_sparse_index(&c, -0.1, 0.75).is_err());
        assert!(build_sparse_index(&c, 1.2, 1.5).is_err());
    }

    #[test]
    fn disjoint_query_scores_zero() {
        let idx = build_sparse_index(&corpus(&[("d", "a b")]), DEFAULT_K1, DEFAULT_B).unwrap();
        assert_eq!(idx.bm25_score(&analyze("q r s"), 0), 0.0);
        assert!(idx.search(&analyze("q r s"), 3).is_empty());
    }

    #[test]
    fn hand_evaluated_score() {
        // corpus {"a": "x x y", "b": "y z"}, query ["x"], k1=1.2, b=0.75:
        // idf = ln(1 + (2-1+0.5)/(1+0.5)) = ln 2
        // tf part = 2*2.2 / (2 + 1.2*(0.25 + 0.75*3/2.5)) = 4.4/3.38
        let idx =
            build_sparse_index(&corpus(&[("a", "x x y"), ("b", "y z")]), 1.2, 0.75).unwrap();
        let score = idx.bm25_score(&analyze("x"), 0);
        assert!((score - 0.9023217735099881).abs() < 1e-12, "got {score}");
    }

    #[test]
    fn repeated_query_token_counted_once() {
        let idx =
            build_sparse_index(&corpus(&[("a", "x x y"), ("b", "y z")]), 1.2, 0.75).unwrap();
        let once = idx.bm25_score(&vec!["x".to_string()], 0);
        let twice = idx.bm25_score(&vec!["x".to_string(), "x".to_string()], 0);
        assert_eq!(once, twice);
    }

    #[test]
    fn k_zero_is_empty() {
        let idx = build_sparse_index(&corpus(&[("d", "a")]), DEFAULT_K1, DEFAULT_B).unwrap();
        assert!(idx.search(&analyze("a"), 0).is_empty());
    }

    #[test]
    fn search_prefix_property() {
        let c = corpus(&[
            ("d0", "aspirin reduces fever"),
            ("d1", "aspirin aspirin dose"),
            ("d2", "fever management at home"),
            ("d3", "dose adjustment for aspirin in fever"),
            ("d4", "unrelated text entirely"),
        ]);
        let idx = build_sparse_index(&c, DEFAULT_K1, DEFAULT_B).unwrap();
        let q = analyze("aspirin fever dose");
        for k in 0..5 {
            let small = idx.search(&q, k);
            let big = idx.search(&q, k + 1);
            assert_eq!(small.entries(), &big.entries()[..small.len()]);
        }
    }

    #[test]
    fn monotone_in_term_frequency() {
        // Same doc length, increasing tf of the query term.
        let c = corpus(&[("d0", "x a a a"), ("d1", "x x a a"), ("d2", "x x x a")]);
        let idx = build_sparse_index(&c, DEFAULT_K1, DEFAULT_B).unwrap();
        let q = analyze("x");
        let s: Vec<f64> = (0..3).map(|p| idx.bm25_score(&q, p)).collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn save_load_round_trip() {
        let c = corpus(&[("d0", "x y"), ("d1", "y z")]);
        let idx = build_sparse_index(&c, DEFAULT_K1, DEFAULT_B).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sparse.json");
        idx.save(&path).unwrap();
        let loaded = SparseIndex::load(&path).unwrap();
        let q = analyze("y z");
        assert_eq!(idx.search(&q, 5), loaded.search(&q, 5));
    }
}
