//! Evidence corpus: JSONL ingestion, validation, and tokenization.
//!
//! Both retrieval indexes are built over a [`Corpus`]. A corpus is immutable
//! after ingestion; re-indexing requires re-ingestion.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One retrievable evidence unit.
#[derive(Debug, Clone)]
pub struct Passage {
    pub id: String,
    pub title: Option<String>,
    pub text: String,
    /// Tokens derived deterministically from `text` via [`analyze`].
    pub tokens: Vec<String>,
}

/// Ordered, id-indexed collection of passages.
#[derive(Debug, Default)]
pub struct Corpus {
    passages: Vec<Passage>,
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

/// Lowercase alphanumeric-run tokenizer. Any codepoint outside `[a-z0-9]`
/// after ASCII lowercasing is a separator; no stemming, no stopwords.
pub fn analyze(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

impl Corpus {
    /// Builds a corpus, enforcing unique non-empty ids and non-empty text.
    pub fn from_passages(passages: Vec<Passage>) -> Result<Self> {
        let mut index = HashMap::with_capacity(passages.len());
        for (pos, p) in passages.iter().enumerate() {
            if p.id.is_empty() {
                return Err(Error::InvalidParameter("empty passage id".into()));
            }
            if p.text.is_empty() {
                return Err(Error::EmptyText { id: p.id.clone() });
            }
            if index.insert(p.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId { id: p.id.clone() });
            }
        }
        Ok(Corpus { passages, index })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.position(id).map(|pos| &self.passages[pos])
    }

    pub fn at(&self, pos: usize) -> &Passage {
        &self.passages[pos]
    }
}

/// Loads a corpus from a UTF-8 JSONL file, one `{"id", "title"?, "text"}`
/// object per line. Unknown keys are ignored; blank lines are not.
pub fn ingest_corpus(path: &Path) -> Result<Corpus> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut passages = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: display.clone(),
                line: lineno,
                detail: e.to_string(),
            })?;
        if raw.text.is_empty() {
            return Err(Error::MalformedRecord {
                path: display.clone(),
                line: lineno,
                detail: format!("passage {:?} has empty text", raw.id),
            });
        }
        let tokens = analyze(&raw.text);
        passages.push(Passage {
            id: raw.id,
            title: raw.title,
            text: raw.text,
            tokens,
        });
    }
    Corpus::from_passages(passages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn analyze_empty() {
        assert!(analyze("").is_empty());
    }

    #[test]
    fn analyze_splits_on_non_alphanumeric() {
        assert_eq!(analyze("Aspirin, 81mg dose."), vec!["aspirin", "81mg", "dose"]);
    }

    #[test]
    fn analyze_treats_non_ascii_as_separator() {
        assert_eq!(analyze("β-blocker use"), vec!["blocker", "use"]);
    }

    #[test]
    fn analyze_idempotent_on_joined_output() {
        for text in ["Aspirin, 81mg dose.", "β-blocker use", "a  b\tc", ""] {
            let once = analyze(text);
            let again = analyze(&once.join(" "));
            assert_eq!(once, again);
        }
    }

    #[test]
    fn ingest_empty_file() {
        let f = write_jsonl(&[]);
        let corpus = ingest_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 0);
    }

    #[test]
    fn ingest_preserves_order() {
        let f = write_jsonl(&[
            r#"{"id":"p1","text":"alpha"}"#,
            r#"{"id":"p2","title":"T","text":"beta"}"#,
            r#"{"id":"p3","text":"gamma","extra":1}"#,
        ]);
        let corpus = ingest_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        let ids: Vec<_> = corpus.passages().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert_eq!(corpus.get("p2").unwrap().title.as_deref(), Some("T"));
    }

    #[test]
    fn ingest_rejects_duplicate_id() {
        let f = write_jsonl(&[
            r#"{"id":"p1","text":"alpha"}"#,
            r#"{"id":"p1","text":"beta"}"#,
        ]);
        let err = ingest_corpus(f.path()).unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");
    }

    #[test]
    fn ingest_rejects_empty_text_with_line_number() {
        let f = write_jsonl(&[r#"{"id":"p1","text":"ok"}"#, r#"{"id":"p2","text":""}"#]);
        let err = ingest_corpus(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2") && msg.contains("p2"), "{msg}");
    }

    #[test]
    fn ingest_reports_malformed_line() {
        let f = write_jsonl(&[r#"{"id":"p1","text":"ok"}"#, "not json"]);
        let err = ingest_corpus(f.path()).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn index_recovers_every_passage() {
        let f = write_jsonl(&[
            r#"{"id":"a","text":"one"}"#,
            r#"{"id":"b","text":"two"}"#,
        ]);
        let corpus = ingest_corpus(f.path()).unwrap();
        for p in corpus.passages() {
            assert_eq!(corpus.get(&p.id).unwrap().text, p.text);
        }
    }
}
