//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {path}:{line}: {detail}")]
    MalformedRecord {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("duplicate passage id {id:?}")]
    DuplicateId { id: String },

    #[error("passage {id:?} has empty text")]
    EmptyText { id: String },

    #[error("missing embedding for passage id {id:?}")]
    MissingEmbedding { id: String },

    #[error("embedding for unknown passage id {id:?}")]
    UnknownEmbeddingId { id: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("passage id {id:?} not found in corpus")]
    UnresolvablePassage { id: String },

    #[error("backend request failed after {attempts} attempts: {detail}")]
    RetriesExhausted { attempts: u32, detail: String },

    #[error("backend returned an empty completion")]
    EmptyCompletion,

    #[error("backend error: {0}")]
    Backend(String),

    #[error("no scripted response for request hash {hash}")]
    MockMiss { hash: String },

    #[error("embedding provider not configured (precomputed-only mode cannot embed queries)")]
    NoEmbedder,

    #[error("sample size {requested} exceeds population {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("empty prediction list")]
    EmptyPredictions,

    #[error("invalid dataset record {id:?}: {detail}")]
    InvalidItem { id: String, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("index artifact error: {0}")]
    IndexFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
