//! Command-line interface: index building, ad-hoc questions, batch
//! evaluation, and the HTTP service.
//!
//! Configuration precedence, highest first: CLI flags, then the config file
//! (`--config` or the `REFLECTRAG_CONFIG` environment variable), then the
//! shipped defaults.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::config::{PipelineConfig, CONFIG_ENV_VAR};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::eval::{load_medqa, load_pubmedqa, run_eval, sample_items, EvalItem};
use crate::generation::Task;
use crate::server::{serve, AppState};

#[derive(Parser)]
#[command(name = "reflectrag", version, about = "Hybrid retrieval QA with self-reflective verification")]
pub struct Cli {
    /// Config file path; falls back to the REFLECTRAG_CONFIG env var.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Corpus JSONL file ({"id", "title"?, "text"} per line).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,

    /// Precomputed embeddings JSONL file ({"id", "vector"} per line).
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,

    /// Directory of scripted backend files (generator.jsonl, verifier.jsonl).
    #[arg(long, global = true)]
    pub mock_backends: Option<PathBuf>,

    /// Iteration cap override.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,

    /// Entailment confidence threshold override.
    #[arg(long, global = true)]
    pub tau: Option<f64>,

    /// Support score acceptance threshold override.
    #[arg(long, global = true)]
    pub theta: Option<f64>,

    /// Rank fusion constant override.
    #[arg(long, global = true)]
    pub k: Option<f64>,

    /// Sampling seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Trace file: one JSONL record per loop iteration.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build and persist both retrieval indexes.
    Index {
        /// Output directory for index artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one question through the pipeline.
    Ask {
        /// The question text.
        question: String,
        /// Multiple-choice options as a JSON object, e.g. '{"A": "..."}'.
        /// Omit for a yes/no question.
        #[arg(long)]
        options: Option<String>,
    },
    /// Run a dataset through the pipeline and write an evaluation report.
    Eval {
        #[arg(long, value_parser = ["medqa", "pubmedqa"])]
        dataset: String,
        /// Dataset JSONL file.
        #[arg(long)]
        input: PathBuf,
        /// Sample size (defaults to the whole dataset).
        #[arg(long)]
        n: Option<usize>,
        /// Report output path.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Start the HTTP service over prebuilt indexes.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var(CONFIG_ENV_VAR).ok().map(PathBuf::from));
    let mut config = match path {
        Some(path) => PipelineConfig::load(&path)?,
        None => PipelineConfig::default(),
    };

    // Flags win over the file.
    if let Some(corpus) = &cli.corpus {
        config.paths.corpus = Some(corpus.clone());
    }
    if let Some(embeddings) = &cli.embeddings {
        config.paths.embeddings = Some(embeddings.clone());
    }
    if let Some(max_iters) = cli.max_iters {
        config.reflection.max_iters = max_iters;
    }
    if let Some(tau) = cli.tau {
        config.reflection.tau = tau;
    }
    if let Some(theta) = cli.theta {
        config.reflection.theta = theta;
    }
    if let Some(k) = cli.k {
        config.fusion.k = k;
    }
    if let Some(seed) = cli.seed {
        config.eval.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn parse_options(raw: Option<&str>) -> Result<Task> {
    match raw {
        None => Ok(Task::binary()),
        Some(raw) => {
            let options: BTreeMap<String, String> = serde_json::from_str(raw)
                .map_err(|e| Error::Config(format!("--options must be a JSON object: {e}")))?;
            if options.is_empty() {
                Ok(Task::binary())
            } else {
                Ok(Task::multiple_choice(options))
            }
        }
    }
}

fn open_trace(path: Option<&PathBuf>) -> Result<Option<BufWriter<File>>> {
    path.map(|p| {
        File::create(p)
            .map(BufWriter::new)
            .map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })
    })
    .transpose()
}

/// Executes a parsed CLI invocation. Errors map to exit code 1; clap maps
/// usage errors to exit code 2 before this runs.
pub fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    let mock_dir = cli.mock_backends.as_ref();

    match &cli.command {
        Command::Index { out } => {
            let engine = Engine::build(&config, mock_dir)?;
            let dir = out.clone().unwrap_or_else(|| config.paths.index_dir.clone());
            engine.save_indexes(&dir)?;
            println!(
                "indexed {} passages into {}",
                engine.corpus.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Ask { question, options } => {
            let task = parse_options(options.as_deref())?;
            let engine = Engine::build(&config, mock_dir)?;
            let mut trace = open_trace(cli.trace.as_ref())?;
            let result = engine.ask(
                question,
                &task,
                trace.as_mut().map(|w| w as &mut dyn Write),
            )?;
            println!("answer: {}", result.answer);
            for (i, statement) in result.statements.iter().enumerate() {
                println!("rationale[{}]: {}", i + 1, statement);
            }
            println!("support_score: {}", result.support_score);
            println!("accepted: {}", result.accepted);
            println!("iterations: {}", result.iterations.len());
            Ok(())
        }
        Command::Eval {
            dataset,
            input,
            n,
            out,
        } => {
            let items: Vec<EvalItem> = match dataset.as_str() {
                "medqa" => load_medqa(input)?,
                "pubmedqa" => {
                    let (items, summary) = load_pubmedqa(input)?;
                    println!(
                        "pubmedqa load: {} kept, {} dropped (maybe)",
                        summary.kept, summary.dropped
                    );
                    items
                }
                other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
            };
            let seed = config.eval.seed;
            let items = match n.or(config.eval.n) {
                Some(n) => sample_items(&items, n, seed)?,
                None => items,
            };
            let engine = Engine::build(&config, mock_dir)?;
            let (report, trace_bytes) = run_eval(
                &items,
                &engine.components(),
                &engine.settings,
                config.eval.workers,
                seed,
                config.snapshot(),
            )?;
            std::fs::write(out, report.to_json_string()).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            if let Some(trace_path) = &cli.trace {
                std::fs::write(trace_path, trace_bytes).map_err(|source| Error::Io {
                    path: trace_path.display().to_string(),
                    source,
                })?;
            }
            println!("n: {}", report.n);
            println!("accuracy: {}", report.accuracy);
            println!("f1 (macro): {}", report.f1);
            println!("report: {}", out.display());
            Ok(())
        }
        Command::Serve { addr } => {
            let engine = match Engine::load(&config, mock_dir) {
                Ok(engine) => Some(Arc::new(engine)),
                Err(e) => {
                    log::warn!("starting without indexes: {e}");
                    None
                }
            };
            serve(AppState { engine }, addr)
        }
    }
}
