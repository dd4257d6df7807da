//! Benchmark dataset loading, sampling, metrics, and the batch runner.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::Task;
use crate::pipeline::{run_pipeline, PipelineComponents, PipelineSettings};

/// Label a parse-failed or invalid prediction is recorded under; never a
/// member of any task's label set, so it always counts as wrong.
pub const UNANSWERED: &str = "<unanswered>";

/// One benchmark question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub question: String,
    pub task: TaskSpec,
    pub gold: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TaskSpec {
    MultipleChoice { options: BTreeMap<String, String> },
    Binary,
}

impl TaskSpec {
    pub fn to_task(&self) -> Task {
        match self {
            TaskSpec::MultipleChoice { options } => Task::multiple_choice(options.clone()),
            TaskSpec::Binary => Task::binary(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LoadSummary {
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Deserialize)]
struct MedQaRecord {
    id: String,
    question: String,
    options: BTreeMap<String, String>,
    answer: String,
}

#[derive(Deserialize)]
struct PubMedQaRecord {
    id: String,
    question: String,
    final_decision: String,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.map(|l| (i + 1, l)).map_err(|source| Error::Io {
                path: display.clone(),
                source,
            })
        })
        .collect()
}

/// Loads multiple-choice items; the gold label must be one of the options.
pub fn load_medqa(path: &Path) -> Result<Vec<EvalItem>> {
    let display = path.display().to_string();
    let mut items = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let rec: MedQaRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: display.clone(),
            line: lineno,
            detail: e.to_string(),
        })?;
        if !rec.options.contains_key(&rec.answer) {
            return Err(Error::InvalidItem {
                id: rec.id,
                detail: format!("gold label {:?} absent from options", rec.answer),
            });
        }
        items.push(EvalItem {
            id: rec.id,
            question: rec.question,
            task: TaskSpec::MultipleChoice {
                options: rec.options,
            },
            gold: rec.answer,
        });
    }
    Ok(items)
}

/// Loads yes/no items; records whose decision is "maybe" are silently
/// dropped and counted in the summary.
pub fn load_pubmedqa(path: &Path) -> Result<(Vec<EvalItem>, LoadSummary)> {
    let display = path.display().to_string();
    let mut items = Vec::new();
    let mut summary = LoadSummary::default();
    for (lineno, line) in read_lines(path)? {
        let rec: PubMedQaRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: display.clone(),
                line: lineno,
                detail: e.to_string(),
            })?;
        match rec.final_decision.as_str() {
            "maybe" => summary.dropped += 1,
            "yes" | "no" => {
                summary.kept += 1;
                items.push(EvalItem {
                    id: rec.id,
                    question: rec.question,
                    task: TaskSpec::Binary,
                    gold: rec.final_decision,
                });
            }
            other => {
                return Err(Error::InvalidItem {
                    id: rec.id,
                    detail: format!("decision {other:?} not in {{yes, no, maybe}}"),
                })
            }
        }
    }
    Ok((items, summary))
}

// Unbiased bounded draw; hand-rolled so sampling stays stable across
// platforms and rand versions.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = u64::MAX - u64::MAX % bound;
    loop {
        let v = rng.next_u64();
        if v < threshold {
            return v % bound;
        }
    }
}

/// Uniform sample of `n` items without replacement from a seeded generator.
pub fn sample_items(items: &[EvalItem], n: usize, seed: u64) -> Result<Vec<EvalItem>> {
    if n > items.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..items.len()).collect();
    for i in 0..n {
        let j = i + bounded(&mut rng, (indices.len() - i) as u64) as usize;
        indices.swap(i, j);
    }
    Ok(indices[..n].iter().map(|&i| items[i].clone()).collect())
}

/// Exact-match accuracy and macro-averaged F1 over `labels`.
///
/// Per-label precision and recall define 0/0 as 0; the per-label F1 values
/// are averaged unweighted. Predictions outside the label set (e.g. the
/// unanswered sentinel) contribute misses but no label of their own.
pub fn compute_metrics(
    predictions: &[(String, String)],
    labels: &BTreeSet<String>,
) -> Result<(f64, f64)> {
    if predictions.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let n = predictions.len() as f64;
    let correct = predictions.iter().filter(|(p, g)| p == g).count() as f64;
    let accuracy = correct / n;

    let mut f1_sum = 0.0;
    for label in labels {
        let tp = predictions
            .iter()
            .filter(|(p, g)| p == label && g == label)
            .count() as f64;
        let fp = predictions
            .iter()
            .filter(|(p, g)| p == label && g != label)
            .count() as f64;
        let fn_ = predictions
            .iter()
            .filter(|(p, g)| p != label && g == label)
            .count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
    }
    let macro_f1 = if labels.is_empty() {
        0.0
    } else {
        f1_sum / labels.len() as f64
    };
    Ok((accuracy, macro_f1))
}

/// Per-item outcome in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub id: String,
    pub predicted: String,
    pub gold: String,
    pub accepted: bool,
    pub iterations: usize,
}

/// Full evaluation report; serialized as pretty JSON with sorted keys.
#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_averaging: &'static str,
    pub per_item: Vec<ItemOutcome>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl EvalReport {
    /// Deterministic rendering: pretty JSON, keys sorted.
    pub fn to_json_string(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let sorted = sort_value(value);
        serde_json::to_string_pretty(&sorted).expect("report renders")
    }
}

fn sort_value(value: serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(map) => {
            // serde_json's default Map is BTreeMap-backed, so rebuilding the
            // object sorts its keys.
            let sorted: serde_json::Map<String, serde_json::Value> = map
                .into_iter()
                .map(|(k, v)| (k, sort_value(v)))
                .collect();
            serde_json::Value::Object(sorted)
        }
        serde_json::Value::Array(values) => {
            serde_json::Value::Array(values.into_iter().map(sort_value).collect())
        }
        other => other,
    }
}

/// Runs every item through the pipeline with a bounded worker pool and
/// aggregates metrics. Results are re-sorted by item id, and per-item
/// traces are emitted in that order, so output is order-independent.
pub fn run_eval(
    items: &[EvalItem],
    components: &PipelineComponents,
    settings: &PipelineSettings,
    workers: usize,
    seed: u64,
    config_snapshot: serde_json::Value,
) -> Result<(EvalReport, Vec<u8>)> {
    let workers = workers.max(1);
    let next = Mutex::new(0usize);
    let results: Mutex<HashMap<usize, (ItemOutcome, Vec<u8>)>> = Mutex::new(HashMap::new());
    let first_error: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len().max(1)) {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= items.len() {
                        return;
                    }
                    let idx = *guard;
                    *guard += 1;
                    idx
                };
                let item = &items[idx];
                let task = item.task.to_task();
                let mut trace_buf: Vec<u8> = Vec::new();
                match run_pipeline(&item.question, &task, components, settings, Some(&mut trace_buf))
                {
                    Ok(result) => {
                        let predicted = task
                            .canonical_label(&result.answer)
                            .unwrap_or_else(|| UNANSWERED.to_string());
                        let outcome = ItemOutcome {
                            id: item.id.clone(),
                            predicted,
                            gold: item.gold.clone(),
                            accepted: result.accepted,
                            iterations: result.iterations.len(),
                        };
                        results.lock().unwrap().insert(idx, (outcome, trace_buf));
                    }
                    Err(e) => {
                        let mut guard = first_error.lock().unwrap();
                        if guard.is_none() {
                            *guard = Some(e);
                        }
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }

    let mut collected: Vec<(ItemOutcome, Vec<u8>)> = results
        .into_inner()
        .unwrap()
        .into_values()
        .collect();
    collected.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let mut labels: BTreeSet<String> = BTreeSet::new();
    for item in items {
        for label in item.task.to_task().labels() {
            labels.insert(label);
        }
    }
    let predictions: Vec<(String, String)> = collected
        .iter()
        .map(|(o, _)| (o.predicted.clone(), o.gold.clone()))
        .collect();
    let (accuracy, f1) = compute_metrics(&predictions, &labels)?;

    let mut trace = Vec::new();
    let mut per_item = Vec::with_capacity(collected.len());
    for (outcome, buf) in collected {
        trace.extend_from_slice(&buf);
        per_item.push(outcome);
    }

    Ok((
        EvalReport {
            n: per_item.len(),
            accuracy,
            f1,
            f1_averaging: "macro",
            per_item,
            config: config_snapshot,
            seed,
        },
        trace,
    ))
}
