//! Prompt construction and answer/rationale parsing for the generator step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fusion::RankedList;

pub const DEFAULT_CONTEXT_CHAR_BUDGET: usize = 12_000;

const SYSTEM_INSTRUCTIONS: &str = "You are a careful clinical assistant. \
Ground every claim in the numbered context passages, exercise clinical caution, \
and never assert anything the context does not support. Respond with a single \
JSON object of the form {\"answer\": \"<label>\", \"rationale\": [\"<statement>\", ...]}. \
Each rationale statement must be a standalone sentence citing the passages that \
support it by bracketed index, e.g. [1].";

/// Kind of QA task; determines the valid answer label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultipleChoice,
    Binary,
}

/// A question plus its answer space.
#[derive(Debug, Clone)]
pub struct Task {
    pub kind: TaskKind,
    /// Label -> option text. Empty for binary tasks (implicit yes/no).
    pub options: BTreeMap<String, String>,
}

impl Task {
    pub fn binary() -> Self {
        Task {
            kind: TaskKind::Binary,
            options: BTreeMap::new(),
        }
    }

    pub fn multiple_choice(options: BTreeMap<String, String>) -> Self {
        Task {
            kind: TaskKind::MultipleChoice,
            options,
        }
    }

    /// Valid answer labels in canonical form.
    pub fn labels(&self) -> Vec<String> {
        match self.kind {
            TaskKind::Binary => vec!["yes".to_string(), "no".to_string()],
            TaskKind::MultipleChoice => self.options.keys().cloned().collect(),
        }
    }

    /// Canonicalizes a candidate label, if valid (case-insensitive match).
    pub fn canonical_label(&self, candidate: &str) -> Option<String> {
        let candidate = candidate.trim();
        self.labels()
            .into_iter()
            .find(|l| l.eq_ignore_ascii_case(candidate))
    }
}

/// A prior attempt shown to the generator for multi-step coherence.
#[derive(Debug, Clone)]
pub struct PriorAttempt {
    pub query: String,
    pub answer: String,
    pub unsupported: Vec<String>,
}

/// Deterministically rendered prompt: fixed system instructions plus a
/// structured user message.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    /// Passage ids actually included after budget truncation, prompt order.
    pub context_ids: Vec<String>,
}

/// Parsed generator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub answer: String,
    pub statements: Vec<String>,
    pub raw: String,
    pub parse_ok: bool,
}

/// Transport to a text generator. A scripted mock must exist for tests.
pub trait GeneratorBackend: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String>;
}

/// Builds the structured prompt: question, options, bracketed context
/// passages, and prior attempts. Context passages are cited `[1]..[n]`;
/// overflow beyond `char_budget` drops whole passages from the tail of the
/// fused ranking, never mid-passage.
pub fn build_prompt(
    query: &str,
    task: &Task,
    context: &RankedList,
    corpus: &Corpus,
    history: &[PriorAttempt],
    char_budget: usize,
) -> Result<PromptBundle> {
    let mut context_block = String::new();
    let mut context_ids = Vec::new();
    for (i, id) in context.ids().enumerate() {
        let passage = corpus.get(id).ok_or_else(|| Error::UnresolvablePassage {
            id: id.to_string(),
        })?;
        let mut entry = format!("[{}] ({})", i + 1, passage.id);
        if let Some(title) = &passage.title {
            entry.push_str(&format!(" {title}:"));
        }
        entry.push(' ');
        entry.push_str(&passage.text);
        entry.push('\n');
        if context_block.chars().count() + entry.chars().count() > char_budget {
            break;
        }
        context_block.push_str(&entry);
        context_ids.push(passage.id.clone());
    }

    let mut user = String::new();
    user.push_str("Question:\n");
    user.push_str(query);
    user.push_str("\n\n");
    match task.kind {
        TaskKind::MultipleChoice => {
            user.push_str("Options:\n");
            for (label, text) in &task.options {
                user.push_str(&format!("{label}. {text}\n"));
            }
            user.push('\n');
        }
        TaskKind::Binary => {
            user.push_str("Answer \"yes\" or \"no\".\n\n");
        }
    }
    user.push_str("Context:\n");
    user.push_str(&context_block);

    if !history.is_empty() {
        user.push_str("\nPrevious attempts:\n");
        for (i, attempt) in history.iter().enumerate() {
            user.push_str(&format!("Attempt {}:\n", i + 1));
            user.push_str(&format!("Question: {}\n", attempt.query));
            user.push_str(&format!("Answer: {}\n", attempt.answer));
            user.push_str("Unsupported statements:\n");
            for s in &attempt.unsupported {
                user.push_str(&format!("- {s}\n"));
            }
        }
    }

    Ok(PromptBundle {
        system: SYSTEM_INSTRUCTIONS.to_string(),
        user,
        context_ids,
    })
}

#[derive(Deserialize)]
struct StructuredResponse {
    answer: String,
    #[serde(default)]
    rationale: Vec<String>,
}

fn try_structured(raw: &str) -> Option<StructuredResponse> {
    let trimmed = raw.trim();
    if let Ok(r) = serde_json::from_str::<StructuredResponse>(trimmed) {
        return Some(r);
    }
    // Completions often wrap the object in prose or code fences.
    let start = trimmed.find('{')?;
    let end = trimmed.rfind('}')?;
    if end <= start {
        return None;
    }
    serde_json::from_str::<StructuredResponse>(&trimmed[start..=end]).ok()
}

fn split_sentences(prose: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in prose.chars() {
        current.push(ch);
        if matches!(ch, '.' | '?' | '!') {
            let s = current.trim().to_string();
            if s.chars().any(|c| c.is_alphanumeric()) {
                out.push(s);
            }
            current.clear();
        }
    }
    let tail = current.trim().to_string();
    if tail.chars().any(|c| c.is_alphanumeric()) {
        out.push(tail);
    }
    out
}

fn try_answer_line(raw: &str) -> Option<(String, Vec<String>)> {
    let mut answer = None;
    let mut prose = String::new();
    for line in raw.lines() {
        let lower = line.trim_start().to_ascii_lowercase();
        if answer.is_none() && lower.starts_with("answer:") {
            let value = line.trim_start()[7..].trim();
            let value = value.trim_end_matches(['.', '!']).trim();
            answer = Some(value.to_string());
        } else {
            prose.push_str(line);
            prose.push('\n');
        }
    }
    answer.map(|a| (a, split_sentences(&prose)))
}

/// Parses a completion into `(answer, statements)`. Primary path: a JSON
/// object `{"answer", "rationale": [...]}` anywhere in the text. Fallback:
/// an `Answer: <label>` line with the remaining prose split into sentences.
/// Never errors; failure is reported through `parse_ok`.
pub fn parse_generation(raw: &str, task: &Task) -> GenerationResult {
    let (answer, statements) = if let Some(structured) = try_structured(raw) {
        let statements: Vec<String> = structured
            .rationale
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        (structured.answer, statements)
    } else if let Some((answer, statements)) = try_answer_line(raw) {
        (answer, statements)
    } else {
        return GenerationResult {
            answer: String::new(),
            statements: Vec::new(),
            raw: raw.to_string(),
            parse_ok: false,
        };
    };

    match task.canonical_label(&answer) {
        Some(label) if !statements.is_empty() => GenerationResult {
            answer: label,
            statements,
            raw: raw.to_string(),
            parse_ok: true,
        },
        _ => GenerationResult {
            answer: answer.trim().to_string(),
            statements,
            raw: raw.to_string(),
            parse_ok: false,
        },
    }
}
