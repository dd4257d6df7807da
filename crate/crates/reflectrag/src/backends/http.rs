//! HTTP backends speaking the de facto chat-completion, NLI-endpoint, and
//! embedding-endpoint wire shapes, with bounded exponential-backoff retry.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::dense::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::generation::GeneratorBackend;
use crate::reflection::{parse_llm_nli, NliLabel, VerifierBackend};

/// Bounded exponential backoff: `attempts` tries, delay doubling from
/// `base_delay_ms` between them.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 200,
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::debug!("attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                    if attempt + 1 < attempts {
                        let delay = self.base_delay_ms.saturating_mul(1 << attempt);
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(Error::RetriesExhausted {
            attempts,
            detail: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }
}

fn post_json(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    body: &serde_json::Value,
) -> Result<serde_json::Value> {
    let response = client
        .post(endpoint)
        .json(body)
        .send()
        .map_err(|e| Error::Backend(e.to_string()))?;
    let status = response.status();
    if !status.is_success() {
        return Err(Error::Backend(format!("status {status}")));
    }
    response
        .json::<serde_json::Value>()
        .map_err(|e| Error::Backend(format!("bad response body: {e}")))
}

/// Chat-completion generator: `POST {model, messages, temperature}` →
/// `{choices: [{message: {content}}]}`.
pub struct ChatGenerator {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    retry: RetryPolicy,
}

impl ChatGenerator {
    pub fn new(endpoint: String, model: String, temperature: f64, retry: RetryPolicy) -> Self {
        ChatGenerator {
            client: reqwest::blocking::Client::new(),
            endpoint,
            model,
            temperature,
            retry,
        }
    }
}

impl GeneratorBackend for ChatGenerator {
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
        });
        let content = self.retry.run(|| {
            log::trace!("chat request to {}: {body}", self.endpoint);
            let value = post_json(&self.client, &self.endpoint, &body)?;
            log::trace!("chat response: {value}");
            value["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Backend("missing choices[0].message.content".into()))
        })?;
        if content.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(content)
    }
}

#[derive(Deserialize)]
struct NliScores {
    #[serde(default)]
    entailment: f64,
    #[serde(default)]
    neutral: f64,
    #[serde(default)]
    contradiction: f64,
}

/// Dedicated NLI service: `POST {premise, hypothesis}` →
/// `{label, scores: {entailment, neutral, contradiction}}`. The entailment
/// confidence is `scores.entailment`.
pub struct NliEndpointVerifier {
    client: reqwest::blocking::Client,
    endpoint: String,
    retry: RetryPolicy,
}

impl NliEndpointVerifier {
    pub fn new(endpoint: String, retry: RetryPolicy) -> Self {
        NliEndpointVerifier {
            client: reqwest::blocking::Client::new(),
            endpoint,
            retry,
        }
    }
}

impl VerifierBackend for NliEndpointVerifier {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<(NliLabel, f64)> {
        let body = json!({"premise": premise, "hypothesis": hypothesis});
        self.retry.run(|| {
            let value = post_json(&self.client, &self.endpoint, &body)?;
            let label = match value["label"].as_str() {
                Some("entailment") => NliLabel::Entailment,
                Some("neutral") => NliLabel::Neutral,
                Some("contradiction") | Some("contradict") => NliLabel::Contradict,
                other => {
                    return Err(Error::Backend(format!("unrecognized NLI label {other:?}")))
                }
            };
            let scores: NliScores = serde_json::from_value(value["scores"].clone())
                .map_err(|e| Error::Backend(format!("bad scores object: {e}")))?;
            let _ = (scores.neutral, scores.contradiction);
            Ok((label, scores.entailment.clamp(0.0, 1.0)))
        })
    }
}

const NLI_INSTRUCTION: &str = "You are a natural language inference classifier. \
Given a premise and a hypothesis, decide whether the premise entails the \
hypothesis. Respond with a single JSON object \
{\"label\": \"entailment\"|\"neutral\"|\"contradict\", \"confidence\": <0..1>}.";

/// LLM prompted to act as an NLI classifier over the chat protocol.
/// Unparseable completions fail closed to `(neutral, 0.0)`.
pub struct LlmNliVerifier<G> {
    generator: G,
}

impl<G: GeneratorBackend> LlmNliVerifier<G> {
    pub fn new(generator: G) -> Self {
        LlmNliVerifier { generator }
    }
}

impl<G: GeneratorBackend> VerifierBackend for LlmNliVerifier<G> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<(NliLabel, f64)> {
        let user = format!("Premise: {premise}\nHypothesis: {hypothesis}");
        let raw = self.generator.complete(NLI_INSTRUCTION, &user)?;
        Ok(parse_llm_nli(&raw))
    }
}

/// Embedding endpoint: `POST {input: [text...], model}` →
/// `{data: [{index, embedding}]}`.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    retry: RetryPolicy,
}

impl HttpEmbedder {
    pub fn new(endpoint: String, model: String, retry: RetryPolicy) -> Self {
        HttpEmbedder {
            client: reqwest::blocking::Client::new(),
            endpoint,
            model,
            retry,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({"input": texts, "model": self.model});
        self.retry.run(|| {
            let value = post_json(&self.client, &self.endpoint, &body)?;
            let data = value["data"]
                .as_array()
                .ok_or_else(|| Error::Backend("missing data array".into()))?;
            let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
            for entry in data {
                let index = entry["index"]
                    .as_u64()
                    .ok_or_else(|| Error::Backend("missing index".into()))?
                    as usize;
                let embedding: Vec<f64> = entry["embedding"]
                    .as_array()
                    .ok_or_else(|| Error::Backend("missing embedding".into()))?
                    .iter()
                    .map(|v| v.as_f64().unwrap_or(0.0))
                    .collect();
                rows.push((index, embedding));
            }
            rows.sort_by_key(|(i, _)| *i);
            if rows.len() != texts.len() {
                return Err(Error::Backend(format!(
                    "expected {} embeddings, got {}",
                    texts.len(),
                    rows.len()
                )));
            }
            Ok(rows.into_iter().map(|(_, v)| v).collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn retry_succeeds_after_failures() {
        let calls = AtomicU32::new(0);
        let policy = RetryPolicy {
            attempts: 3,
            base_delay_ms: 0,
        };
        let result = policy.run(|| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(Error::Backend("flaky".into()))
            } else {
                Ok(42)
            }
        });
        assert_eq!(result.unwrap(), 42);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_exhausts() {
        let policy = RetryPolicy {
            attempts: 3,
            base_delay_ms: 0,
        };
        let err = policy
            .run::<()>(|| Err(Error::Backend("down".into())))
            .unwrap_err();
        match err {
            Error::RetriesExhausted { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unreachable_generator_exhausts_retries() {
        let gen = ChatGenerator::new(
            // Reserved port that nothing listens on.
            "http://127.0.0.1:1/v1/chat/completions".to_string(),
            "m".to_string(),
            0.0,
            RetryPolicy {
                attempts: 3,
                base_delay_ms: 0,
            },
        );
        let err = gen.complete("s", "u").unwrap_err();
        assert!(matches!(err, Error::RetriesExhausted { attempts: 3, .. }), "{err}");
    }
}
