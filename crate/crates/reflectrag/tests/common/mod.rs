//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use reflectrag::corpus::{analyze, Corpus, Passage};
use reflectrag::dense::{build_dense_index_from_provider, DenseIndex};
use reflectrag::backends::HashedEmbedder;
use reflectrag::sparse::{build_sparse_index, SparseIndex, DEFAULT_B, DEFAULT_K1};

pub fn make_corpus(docs: &[(&str, &str)]) -> Corpus {
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

pub fn default_docs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("p1", "aspirin reduces fever and inflammation in adults"),
        ("p2", "beta blockers lower heart rate and blood pressure"),
        ("p3", "the trial showed benefit for low dose aspirin"),
        ("p4", "dosage was tolerated well in elderly patients"),
        ("p5", "fever management includes hydration and rest"),
    ]
}

pub struct IndexedFixture {
    pub corpus: Corpus,
    pub sparse: SparseIndex,
    pub dense: DenseIndex,
    pub embedder: HashedEmbedder,
}

pub fn indexed_fixture() -> IndexedFixture {
    let corpus = make_corpus(&default_docs());
    let sparse = build_sparse_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
    let embedder = HashedEmbedder::new(8).unwrap();
    let dense = build_dense_index_from_provider(&corpus, &embedder).unwrap();
    IndexedFixture {
        corpus,
        sparse,
        dense,
        embedder,
    }
}

pub fn mc_options() -> BTreeMap<String, String> {
    [("A", "one"), ("B", "two"), ("C", "three"), ("D", "four")]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
