//! Statement-level entailment verification and the accept/refine decision.
//!
//! Each rationale statement is checked against every context passage: the
//! passage is the premise, the statement the hypothesis. The passage with
//! the highest entailment confidence is the statement's best support.

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::error::Result;

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradict,
}

/// Classifies a (premise, hypothesis) pair into an NLI label with a
/// confidence in [0, 1].
pub trait VerifierBackend: Send + Sync {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<(NliLabel, f64)>;
}

/// Verdict for one rationale statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementVerdict {
    pub statement: String,
    pub best_passage: Option<String>,
    pub label: NliLabel,
    pub confidence: f64,
    pub supported: bool,
    /// Set when the backend failed and the statement was marked unsupported
    /// fail-closed.
    pub backend_error: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Refine,
}

/// Aggregated verification outcome for one iteration's rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub verdicts: Vec<StatementVerdict>,
    pub support_score: f64,
    pub decision: Decision,
    pub unsupported: Vec<String>,
}

/// Parses an LLM-as-NLI completion: a JSON object `{"label", "confidence"}`
/// with confidence clamped to [0, 1]. Any parse failure yields
/// `(neutral, 0.0)`.
pub fn parse_llm_nli(raw: &str) -> (NliLabel, f64) {
    #[derive(Deserialize)]
    struct Obj {
        label: String,
        confidence: f64,
    }
    let trimmed = raw.trim();
    let parsed = serde_json::from_str::<Obj>(trimmed).ok().or_else(|| {
        let start = trimmed.find('{')?;
        let end = trimmed.rfind('}')?;
        serde_json::from_str::<Obj>(trimmed.get(start..=end)?).ok()
    });
    match parsed {
        Some(obj) => {
            let label = match obj.label.to_ascii_lowercase().as_str() {
                "entailment" => NliLabel::Entailment,
                "neutral" => NliLabel::Neutral,
                "contradict" | "contradiction" => NliLabel::Contradict,
                _ => return (NliLabel::Neutral, 0.0),
            };
            (label, obj.confidence.clamp(0.0, 1.0))
        }
        None => (NliLabel::Neutral, 0.0),
    }
}

/// Verifies one statement against the full context: one verifier call per
/// passage. Backend failures mark the statement unsupported (fail-closed)
/// rather than aborting the run.
pub fn verify_statement(
    verifier: &dyn VerifierBackend,
    statement: &str,
    context: &[&Passage],
    tau: f64,
) -> StatementVerdict {
    // Best pair: prefer entailment labels, then highest confidence; ties go
    // to the earlier passage in context order.
    let mut best: Option<(&Passage, NliLabel, f64)> = None;
    let mut backend_error = false;
    for passage in context {
        match verifier.classify(&passage.text, statement) {
            Ok((label, confidence)) => {
                let key = (label == NliLabel::Entailment, confidence);
                let better = match &best {
                    None => true,
                    Some((_, bl, bc)) => key > (*bl == NliLabel::Entailment, *bc),
                };
                if better {
                    best = Some((passage, label, confidence));
                }
            }
            Err(e) => {
                log::warn!("verifier backend error on passage {}: {e}", passage.id);
                backend_error = true;
            }
        }
    }
    match best {
        Some((passage, label, confidence)) => StatementVerdict {
            statement: statement.to_string(),
            best_passage: Some(passage.id.clone()),
            label,
            confidence,
            supported: label == NliLabel::Entailment && confidence > tau,
            backend_error,
        },
        None => StatementVerdict {
            statement: statement.to_string(),
            best_passage: None,
            label: NliLabel::Neutral,
            confidence: 0.0,
            supported: false,
            backend_error,
        },
    }
}

/// Computes the support score (proportion of supported statements) and the
/// accept/refine decision. An empty rationale scores 0 and refines: an
/// unverifiable answer must not be accepted.
pub fn score_rationale(verdicts: Vec<StatementVerdict>, theta: f64) -> SupportReport {
    let supported = verdicts.iter().filter(|v| v.supported).count();
    let support_score = if verdicts.is_empty() {
        0.0
    } else {
        supported as f64 / verdicts.len() as f64
    };
    let decision = if support_score >= theta {
        Decision::Accept
    } else {
        Decision::Refine
    };
    let unsupported = verdicts
        .iter()
        .filter(|v| !v.supported)
        .map(|v| v.statement.clone())
        .collect();
    SupportReport {
        verdicts,
        support_score,
        decision,
        unsupported,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{analyze, Passage};
    use crate::error::Error;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn passage(id: &str, text: &str) -> Passage {
        Passage {
            id: id.to_string(),
            title: None,
            text: text.to_string(),
            tokens: analyze(text),
        }
    }

    /// Verifier keyed on premise text; counts calls.
    struct TableVerifier {
        table: HashMap<String, (NliLabel, f64)>,
        calls: AtomicUsize,
    }

    impl TableVerifier {
        fn new(rows: &[(&str, NliLabel, f64)]) -> Self {
            TableVerifier {
                table: rows
                    .iter()
                    .map(|(p, l, c)| (p.to_string(), (*l, *c)))
                    .collect(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl VerifierBackend for TableVerifier {
        fn classify(&self, premise: &str, _hypothesis: &str) -> Result<(NliLabel, f64)> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(*self.table.get(premise).expect("unscripted premise"))
        }
    }

    struct FailingVerifier;
    impl VerifierBackend for FailingVerifier {
        fn classify(&self, _p: &str, _h: &str) -> Result<(NliLabel, f64)> {
            Err(Error::Backend("down".into()))
        }
    }

    #[test]
    fn empty_context_is_neutral_unsupported() {
        let v = TableVerifier::new(&[]);
        let verdict = verify_statement(&v, "s", &[], 0.5);
        assert_eq!(verdict.label, NliLabel::Neutral);
        assert_eq!(verdict.confidence, 0.0);
        assert!(!verdict.supported);
        assert!(verdict.best_passage.is_none());
    }

    #[test]
    fn argmax_entailment_confidence() {
        let p1 = passage("p1", "t1");
        let p2 = passage("p2", "t2");
        let v = TableVerifier::new(&[
            ("t1", NliLabel::Entailment, 0.9),
            ("t2", NliLabel::Entailment, 0.4),
        ]);
        let verdict = verify_statement(&v, "s", &[&p1, &p2], 0.5);
        assert_eq!(verdict.best_passage.as_deref(), Some("p1"));
        assert_eq!(verdict.confidence, 0.9);
        assert!(verdict.supported);
    }

    #[test]
    fn contradiction_never_supports() {
        let p1 = passage("p1", "t1");
        let p2 = passage("p2", "t2");
        let v = TableVerifier::new(&[
            ("t1", NliLabel::Contradict, 0.95),
            ("t2", NliLabel::Contradict, 0.95),
        ]);
        let verdict = verify_statement(&v, "s", &[&p1, &p2], 0.5);
        assert!(!verdict.supported);
        assert_eq!(verdict.label, NliLabel::Contradict);
    }

    #[test]
    fn entailment_preferred_over_higher_confidence_contradiction() {
        let p1 = passage("p1", "t1");
        let p2 = passage("p2", "t2");
        let v = TableVerifier::new(&[
            ("t1", NliLabel::Contradict, 0.99),
            ("t2", NliLabel::Entailment, 0.6),
        ]);
        let verdict = verify_statement(&v, "s", &[&p1, &p2], 0.5);
        assert_eq!(verdict.best_passage.as_deref(), Some("p2"));
        assert!(verdict.supported);
    }

    #[test]
    fn one_call_per_passage() {
        let p1 = passage("p1", "t1");
        let p2 = passage("p2", "t2");
        let p3 = passage("p3", "t3");
        let v = TableVerifier::new(&[
            ("t1", NliLabel::Neutral, 0.1),
            ("t2", NliLabel::Neutral, 0.1),
            ("t3", NliLabel::Neutral, 0.1),
        ]);
        verify_statement(&v, "s", &[&p1, &p2, &p3], 0.5);
        assert_eq!(v.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backend_failure_is_fail_closed() {
        let p1 = passage("p1", "t1");
        let verdict = verify_statement(&FailingVerifier, "s", &[&p1], 0.5);
        assert!(!verdict.supported);
        assert!(verdict.backend_error);
    }

    #[test]
    fn raising_tau_is_monotone() {
        let p1 = passage("p1", "t1");
        let v = TableVerifier::new(&[("t1", NliLabel::Entailment, 0.6)]);
        let lo = verify_statement(&v, "s", &[&p1], 0.3);
        let hi = verify_statement(&v, "s", &[&p1], 0.9);
        assert!(lo.supported && !hi.supported);
    }

    #[test]
    fn strict_inequality_at_tau() {
        let p1 = passage("p1", "t1");
        let v = TableVerifier::new(&[("t1", NliLabel::Entailment, 0.5)]);
        let verdict = verify_statement(&v, "s", &[&p1], 0.5);
        assert!(!verdict.supported, "confidence must exceed tau strictly");
    }

    fn verdict(statement: &str, supported: bool) -> StatementVerdict {
        StatementVerdict {
            statement: statement.to_string(),
            best_passage: Some("p".into()),
            label: if supported {
                NliLabel::Entailment
            } else {
                NliLabel::Neutral
            },
            confidence: if supported { 0.9 } else { 0.1 },
            supported,
            backend_error: false,
        }
    }

    #[test]
    fn support_score_two_thirds_refines() {
        let report = score_rationale(
            vec![verdict("s1", true), verdict("s2", true), verdict("s3", false)],
            0.7,
        );
        assert!((report.support_score - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.decision, Decision::Refine);
        assert_eq!(report.unsupported, ["s3"]);
    }

    #[test]
    fn all_supported_accepts() {
        let report = score_rationale(vec![verdict("s1", true), verdict("s2", true)], 0.7);
        assert_eq!(report.support_score, 1.0);
        assert_eq!(report.decision, Decision::Accept);
        assert!(report.unsupported.is_empty());
    }

    #[test]
    fn empty_rationale_refines() {
        let report = score_rationale(vec![], 0.7);
        assert_eq!(report.support_score, 0.0);
        assert_eq!(report.decision, Decision::Refine);
    }

    #[test]
    fn theta_boundary_accepts_at_exact_threshold() {
        // S exactly 0.70 must accept.
        let verdicts: Vec<_> = (0..10)
            .map(|i| verdict(&format!("s{i}"), i < 7))
            .collect();
        let report = score_rationale(verdicts, 0.7);
        assert!((report.support_score - 0.7).abs() < 1e-12);
        assert_eq!(report.decision, Decision::Accept);
    }

    #[test]
    fn unsupported_preserves_order() {
        let report = score_rationale(
            vec![verdict("b", false), verdict("a", true), verdict("c", false)],
            0.9,
        );
        assert_eq!(report.unsupported, ["b", "c"]);
    }

    #[test]
    fn parse_llm_nli_cases() {
        assert_eq!(
            parse_llm_nli(r#"{"label":"entailment","confidence":0.83}"#),
            (NliLabel::Entailment, 0.83)
        );
        assert_eq!(parse_llm_nli("I think it follows."), (NliLabel::Neutral, 0.0));
        assert_eq!(
            parse_llm_nli(r#"{"label":"entailment","confidence":1.7}"#),
            (NliLabel::Entailment, 1.0)
        );
        assert_eq!(
            parse_llm_nli(r#"{"label":"contradiction","confidence":0.4}"#),
            (NliLabel::Contradict, 0.4)
        );
    }
}
