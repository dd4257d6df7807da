//! Hybrid sparse/dense retrieval with self-reflective answer verification.
//!
//! The crate implements an iterative question-answering loop: BM25 and
//! dot-product retrieval fused by reciprocal rank fusion, answer and
//! rationale generation through a pluggable backend, statement-level
//! entailment verification, and query refinement driven by unsupported
//! statements. An evaluation harness runs multiple-choice and yes/no QA
//! datasets through the loop and reports exact-match accuracy and macro F1.

pub mod backends;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dense;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod generation;
pub mod pipeline;
pub mod reflection;
pub mod server;
pub mod sparse;

pub use error::{Error, Result};
