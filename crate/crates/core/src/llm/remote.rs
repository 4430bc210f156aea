use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest};
use crate::error::{Error, Result};

/// Client for an OpenAI-style `chat/completions` endpoint.
///
/// Sends `{model, messages: [{role, content}], temperature, max_tokens}` and
/// reads `choices[0].message.content`.
pub struct RemoteChatBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteChatBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Transport(format!("building HTTP client: {e}")))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }

    /// Reads the API key from `env_var` if it is set.
    pub fn from_env(endpoint: impl Into<String>, env_var: Option<&str>, timeout: Duration) -> Result<Self> {
        let api_key = env_var.and_then(|v| std::env::var(v).ok());
        Self::new(endpoint, api_key, timeout)
    }
}

pub(crate) fn body_excerpt(body: &str) -> String {
    const MAX: usize = 512;
    if body.len() <= MAX {
        return body.to_string();
    }
    let mut end = MAX;
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &body[..end])
}

impl ChatBackend for RemoteChatBackend {
    fn backend_id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn send(&self, request: &ChatRequest) -> Result<String> {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &request.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.user_prompt}));
        let payload = json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });

        let mut builder = self.client.post(&self.endpoint).json(&payload);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| Error::Transport(e.to_string()))?;
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
        match value.pointer("/choices/0/message/content") {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Null) | None => Ok(String::new()),
            Some(other) => Ok(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excerpt_respects_char_boundaries() {
        let body = "é".repeat(400);
        let ex = body_excerpt(&body);
        assert!(ex.ends_with("..."));
        assert!(ex.len() <= 515);
    }
}
