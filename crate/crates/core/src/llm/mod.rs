//! Chat-completion gateway shared by the generator and evaluator roles.
//!
//! A [`Gateway`] wraps one [`ChatBackend`] with a retry policy and an
//! in-flight request limit. Backends are either the HTTP client in
//! [`remote`] or the deterministic mocks in [`mock`].

pub mod mock;
pub mod remote;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::augment::Task;
use crate::error::{Error, Result};

pub use mock::{mock_generate, EvaluatorProfile, MockBackend, MockProfile};
pub use remote::RemoteChatBackend;

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

/// Which of the three prompt kinds a request carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStage {
    Generate,
    Score,
    Regenerate,
}

/// Out-of-band description of a request. Never sent over the wire; the mock
/// backends read it instead of re-parsing the prompt text.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub stage: PromptStage,
    pub task: Task,
    pub document: String,
    pub prior_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_name: String,
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub temperature: f32,
    pub max_output_tokens: u32,
    pub context: Option<PromptContext>,
}

impl ChatRequest {
    /// Greedy decoding (temperature 0) and the default output budget.
    pub fn new(model_name: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            model_name: model_name.into(),
            system_prompt: None,
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            context: None,
        }
    }

    pub fn with_system_prompt(mut self, system: impl Into<String>) -> Self {
        self.system_prompt = Some(system.into());
        self
    }

    pub fn with_context(mut self, context: PromptContext) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::InvalidArgument("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryEvent {
    /// 1-based attempt that failed.
    pub attempt: u32,
    pub backoff: Duration,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
    pub attempts: u32,
    pub retries: Vec<RetryEvent>,
}

/// One completion attempt against a concrete service.
pub trait ChatBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn send(&self, request: &ChatRequest) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    #[serde(with = "millis")]
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Backoff before retry number `retry` (0-based): initial * 2^retry, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Counting semaphore bounding concurrent requests.
struct Limiter {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable entry point for completions.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    limiter: Arc<Limiter>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, retry: RetryPolicy, parallelism: usize) -> Self {
        Self {
            backend,
            retry,
            limiter: Arc::new(Limiter::new(parallelism)),
        }
    }

    pub fn backend_id(&self) -> String {
        self.backend.backend_id()
    }

    /// Returns the backend's text verbatim. Transient failures (transport
    /// errors, HTTP 408/429/5xx) are retried with exponential backoff.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        request.validate()?;
        let _permit = self.limiter.acquire();
        let backend_id = self.backend.backend_id();
        let started = Instant::now();
        let mut retries = Vec::new();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.backend.send(request) {
                Ok(text) if text.is_empty() => return Err(Error::EmptyOutput),
                Ok(text) => {
                    let latency = started.elapsed();
                    debug!(backend = %backend_id, attempt, latency_ms = latency.as_millis() as u64, "completion ok");
                    return Ok(ChatResponse {
                        text,
                        latency,
                        backend_id,
                        attempts: attempt,
                        retries,
                    });
                }
                Err(e) if e.is_transient() && attempt <= self.retry.max_retries => {
                    let backoff = self.retry.backoff(attempt - 1);
                    warn!(
                        backend = %backend_id,
                        attempt,
                        backoff_ms = backoff.as_millis() as u64,
                        error = %e,
                        "retrying completion"
                    );
                    retries.push(RetryEvent {
                        attempt,
                        backoff,
                        error: e.to_string(),
                    });
                    std::thread::sleep(backoff);
                }
                Err(e) => return Err(e),
            }
        }
    }
}
