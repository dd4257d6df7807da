//! The inference loop: retrieve, generate, verify, refine.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{analyze, Corpus, Passage};
use crate::dense::{DenseIndex, EmbeddingProvider};
use crate::error::Result;
use crate::fusion::{rrf_fuse, FusionConfig, RankedList};
use crate::generation::{
    build_prompt, parse_generation, GeneratorBackend, PriorAttempt, Task,
};
use crate::reflection::{score_rationale, verify_statement, Decision, VerifierBackend};
use crate::sparse::SparseIndex;

pub const DEFAULT_MAX_ITERS: usize = 3;
pub const DEFAULT_DEPTH: usize = 32;

pub const REFINE_MARKER: &str = "Additionally find evidence for:";

/// One loop iteration's full record; also the trace JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub query: String,
    pub context_ids: Vec<String>,
    pub answer: String,
    pub statements: Vec<String>,
    pub support_score: f64,
    pub unsupported: Vec<String>,
    pub parse_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Accepted,
    CapReached,
    ParseFailed,
}

/// Final loop outcome with the per-iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub answer: String,
    pub statements: Vec<String>,
    pub accepted: bool,
    pub support_score: f64,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
}

/// Read-only components shared by every run.
pub struct PipelineComponents<'a> {
    pub corpus: &'a Corpus,
    pub sparse: &'a SparseIndex,
    pub dense: &'a DenseIndex,
    pub embedder: &'a dyn EmbeddingProvider,
    pub generator: &'a dyn GeneratorBackend,
    pub verifier: &'a dyn VerifierBackend,
}

/// Loop parameters. See the config module for the shipped defaults.
#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub depth: usize,
    pub k_out: usize,
    pub rrf_k: f64,
    pub tau: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub char_budget: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            depth: DEFAULT_DEPTH,
            k_out: 8,
            rrf_k: 60.0,
            tau: crate::reflection::DEFAULT_TAU,
            theta: crate::reflection::DEFAULT_THETA,
            max_iters: DEFAULT_MAX_ITERS,
            char_budget: crate::generation::DEFAULT_CONTEXT_CHAR_BUDGET,
        }
    }
}

/// Builds the refined query: the original question followed by a marker line
/// and the deduplicated unsupported statements in first-seen order. Repeated
/// refinement replaces the appended block, so the block always holds the
/// union of all unsupported statements seen so far.
pub fn refine_query(original: &str, unsupported_union: &[String]) -> String {
    if unsupported_union.is_empty() {
        return original.to_string();
    }
    let mut out = String::from(original);
    out.push('\n');
    out.push_str(REFINE_MARKER);
    for s in unsupported_union {
        out.push('\n');
        out.push_str("- ");
        out.push_str(s);
    }
    out
}

fn retrieve(
    query: &str,
    components: &PipelineComponents,
    settings: &PipelineSettings,
) -> Result<RankedList> {
    let tokens = analyze(query);
    let sparse_list = components.sparse.search(&tokens, settings.depth);
    let dense_list = if components.dense.is_empty() {
        RankedList::new()
    } else {
        let query_vec = components
            .embedder
            .embed(std::slice::from_ref(&query.to_string()))?
            .pop()
            .unwrap_or_default();
        components.dense.search(&query_vec, settings.depth)?
    };
    Ok(rrf_fuse(
        &[sparse_list, dense_list],
        &FusionConfig {
            k: settings.rrf_k,
            k_out: settings.k_out,
        },
    ))
}

/// Runs the full inference loop for one question.
///
/// Each iteration retrieves a fused context, generates an answer/rationale,
/// and verifies the rationale. An accepted rationale terminates the loop;
/// otherwise the unsupported statements refine the query. After `max_iters`
/// the best-scoring iteration's answer is returned flagged unaccepted. A
/// failed parse counts as support score 0 for its iteration.
pub fn run_pipeline(
    question: &str,
    task: &Task,
    components: &PipelineComponents,
    settings: &PipelineSettings,
    mut trace: Option<&mut dyn Write>,
) -> Result<PipelineResult> {
    let mut query = question.to_string();
    let mut unsupported_union: Vec<String> = Vec::new();
    let mut history: Vec<PriorAttempt> = Vec::new();
    let mut records: Vec<IterationRecord> = Vec::new();

    for iteration in 0..settings.max_iters {
        let context = retrieve(&query, components, settings)?;
        let prompt = build_prompt(
            &query,
            task,
            &context,
            components.corpus,
            &history,
            settings.char_budget,
        )?;
        let raw = components.generator.complete(&prompt.system, &prompt.user)?;
        let generation = parse_generation(&raw, task);

        let passages: Vec<&Passage> = prompt
            .context_ids
            .iter()
            .map(|id| components.corpus.get(id).expect("context id from corpus"))
            .collect();

        let report = if generation.parse_ok {
            let verdicts = generation
                .statements
                .iter()
                .map(|s| verify_statement(components.verifier, s, &passages, settings.tau))
                .collect();
            score_rationale(verdicts, settings.theta)
        } else {
            score_rationale(Vec::new(), settings.theta)
        };

        let record = IterationRecord {
            iteration,
            query: query.clone(),
            context_ids: prompt.context_ids.clone(),
            answer: generation.answer.clone(),
            statements: generation.statements.clone(),
            support_score: report.support_score,
            unsupported: report.unsupported.clone(),
            parse_ok: generation.parse_ok,
        };
        if let Some(w) = trace.as_deref_mut() {
            serde_json::to_writer(&mut *w, &record)
                .map_err(|e| crate::error::Error::Backend(e.to_string()))?;
            writeln!(w).map_err(|e| crate::error::Error::Backend(e.to_string()))?;
        }
        records.push(record);

        if report.decision == Decision::Accept && generation.parse_ok {
            return Ok(PipelineResult {
                answer: generation.answer,
                statements: generation.statements,
                accepted: true,
                support_score: report.support_score,
                iterations: records,
                termination: Termination::Accepted,
            });
        }

        // Record history and refine for the next round.
        history.push(PriorAttempt {
            query: query.clone(),
            answer: generation.answer.clone(),
            unsupported: report.unsupported.clone(),
        });
        for s in report.unsupported {
            if !unsupported_union.contains(&s) {
                unsupported_union.push(s);
            }
        }
        query = refine_query(question, &unsupported_union);
    }

    // Cap reached: best support score wins, ties go to the latest iteration.
    let best = records
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.support_score
                .partial_cmp(&b.support_score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("max_iters >= 1");
    let chosen = &records[best];
    let termination = if records.iter().all(|r| !r.parse_ok) {
        Termination::ParseFailed
    } else {
        Termination::CapReached
    };
    Ok(PipelineResult {
        answer: chosen.answer.clone(),
        statements: chosen.statements.clone(),
        accepted: false,
        support_score: chosen.support_score,
        iterations: records.clone(),
        termination,
    })
}
