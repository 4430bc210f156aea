use std::time::Duration;

use serde_json::{json, Value};
use tracing::warn;

use super::{Embedding, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::llm::remote::body_excerpt;
use crate::llm::RetryPolicy;

/// Client for an HTTP embedding endpoint taking `{model, input: [..]}`.
///
/// Accepts a bare list of float arrays, `{"embeddings": [...]}`, or the
/// OpenAI-style `{"data": [{"embedding": [...], "index": i}]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    batch_size: usize,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        dim: usize,
        batch_size: usize,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Transport(format!("building HTTP client: {e}")))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            dim,
            batch_size: batch_size.max(1),
            retry,
            client,
        })
    }

    fn send_once(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&json!({"model": self.model, "input": texts}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| Error::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Error::Backend {
                status: status.as_u16(),
                body: body_excerpt(&body),
            });
        }
        let value: Value = serde_json::from_str(&body).map_err(|e| Error::Backend {
            status: status.as_u16(),
            body: format!("undecodable response ({e}): {}", body_excerpt(&body)),
        })?;
        decode_vectors(&value)
    }
}

fn as_vector(v: &Value) -> Option<Embedding> {
    let arr = v.as_array()?;
    arr.iter()
        .map(|x| x.as_f64().map(|f| f as f32))
        .collect::<Option<Vec<f32>>>()
        .map(Embedding::new)
}

pub(crate) fn decode_vectors(value: &Value) -> Result<Vec<Embedding>> {
    let bad = || Error::Validation("embedding response is not a list of float arrays".into());
    match value {
        Value::Array(rows) => rows.iter().map(|r| as_vector(r).ok_or_else(bad)).collect(),
        Value::Object(obj) => {
            if let Some(rows) = obj.get("embeddings") {
                return decode_vectors(rows);
            }
            let data = obj.get("data").and_then(Value::as_array).ok_or_else(bad)?;
            let mut indexed: Vec<(u64, Embedding)> = data
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let vec = item.get("embedding").and_then(as_vector).ok_or_else(bad)?;
                    let idx = item.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
                    Ok((idx, vec))
                })
                .collect::<Result<_>>()?;
            indexed.sort_by_key(|(i, _)| *i);
            Ok(indexed.into_iter().map(|(_, e)| e).collect())
        }
        _ => Err(bad()),
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> String {
        format!("remote:{}:{}", self.endpoint, self.model)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let mut retry = 0;
        loop {
            match self.send_once(texts) {
                Err(e) if e.is_transient() && retry < self.retry.max_retries => {
                    let backoff = self.retry.backoff(retry);
                    warn!(attempt = retry + 1, backoff_ms = backoff.as_millis() as u64, error = %e, "retrying embedding batch");
                    std::thread::sleep(backoff);
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}
