//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or none) is a valid configuration; command-line flags override
//! individual fields afterwards.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentOptions, Task, DEFAULT_TAU};
use crate::embed::{EmbeddingProvider, HashEmbedder, RemoteEmbedder, DEFAULT_HASH_DIM};
use crate::error::{Error, Result};
use crate::eval::{Gain, ScenarioConfig, DEFAULT_K_VALUES};
use crate::llm::{EvaluatorProfile, Gateway, MockBackend, MockProfile, RemoteChatBackend, RetryPolicy, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::organize::{Language, Strategy};
use crate::vdb::VectorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub parallelism: usize,
    pub language: Language,
    /// Subsample the corpus to this many documents at ingest.
    pub sample_size: Option<usize>,
    pub tau: i32,
    pub tasks: Vec<Task>,
    pub max_output_tokens: u32,
    pub generator: ChatConfig,
    pub evaluator: ChatConfig,
    pub retry: RetryPolicy,
    pub embedder: EmbedderConfig,
    /// Organization strategies embedded into the index.
    pub strategies: Vec<Strategy>,
    /// Strategy used by retrieve, eval and ablate.
    pub strategy: Strategy,
    pub components: Vec<VectorKind>,
    pub k_values: Vec<usize>,
    pub gain: Gain,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 42,
            parallelism: 4,
            language: Language::En,
            sample_size: None,
            tau: DEFAULT_TAU,
            tasks: vec![Task::Qag, Task::Ee],
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            generator: ChatConfig::Mock(MockSetup::Generator(MockProfile::EchoOracle)),
            evaluator: ChatConfig::Mock(MockSetup::Evaluator(EvaluatorProfile::Heuristic)),
            retry: RetryPolicy::default(),
            embedder: EmbedderConfig::Hash {
                dim: DEFAULT_HASH_DIM,
                seed: 0,
            },
            strategies: vec![Strategy::Tri, Strategy::Tmo],
            strategy: Strategy::Tmo,
            components: VectorKind::ALL.to_vec(),
            k_values: DEFAULT_K_VALUES.to_vec(),
            gain: Gain::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: None,
            queries: None,
            qrels: None,
            output_dir: PathBuf::from("densaug-out"),
        }
    }
}

/// Mock generators and evaluators share one table shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockSetup {
    Generator(MockProfile),
    Evaluator(EvaluatorProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChatConfig {
    Mock(MockSetup),
    /// OpenAI-compatible chat completions endpoint.
    Remote {
        endpoint: String,
        model: String,
        /// Environment variable holding the API key.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderConfig {
    Hash {
        #[serde(default = "default_hash_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Remote {
        endpoint: String,
        model: String,
        dim: usize,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_batch")]
        batch_size: usize,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_hash_dim() -> usize {
    DEFAULT_HASH_DIM
}

fn default_batch() -> usize {
    64
}

fn api_key(env: &Option<String>) -> Result<Option<String>> {
    match env {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("environment variable {var} is not set"))),
    }
}

impl ChatConfig {
    /// Model name sent in requests; mocks ignore it.
    pub fn model(&self, fallback: &str) -> String {
        match self {
            ChatConfig::Mock(_) => fallback.to_string(),
            ChatConfig::Remote { model, .. } => model.clone(),
        }
    }

    pub fn gateway(&self, seed: u64, retry: &RetryPolicy, parallelism: usize) -> Result<Gateway> {
        let backend: std::sync::Arc<dyn crate::llm::ChatBackend> = match self {
            ChatConfig::Mock(MockSetup::Generator(p)) => std::sync::Arc::new(MockBackend::generator(p.clone(), seed)),
            ChatConfig::Mock(MockSetup::Evaluator(p)) => std::sync::Arc::new(MockBackend::evaluator(p.clone())),
            ChatConfig::Remote {
                endpoint,
                api_key_env,
                timeout_secs,
                ..
            } => std::sync::Arc::new(RemoteChatBackend::new(
                endpoint.clone(),
                api_key(api_key_env)?,
                Duration::from_secs(*timeout_secs),
            )?),
        };
        Ok(Gateway::new(backend, retry.clone(), parallelism))
    }
}

impl EmbedderConfig {
    pub fn provider(&self, retry: &RetryPolicy) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            EmbedderConfig::Hash { dim, seed } => Box::new(HashEmbedder::new(*dim, *seed)),
            EmbedderConfig::Remote {
                endpoint,
                model,
                dim,
                api_key_env,
                batch_size,
                timeout_secs,
            } => Box::new(RemoteEmbedder::new(
                endpoint.clone(),
                model.clone(),
                api_key(api_key_env)?,
                *dim,
                *batch_size,
                Duration::from_secs(*timeout_secs),
                retry.clone(),
            )?),
        })
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Validation(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Reads `path`, resolving relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            cfg.paths.corpus.as_mut().map(fix);
            cfg.paths.queries.as_mut().map(fix);
            cfg.paths.qrels.as_mut().map(fix);
            fix(&mut cfg.paths.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.augment_options().validate()?;
        if matches!(self.generator, ChatConfig::Mock(MockSetup::Evaluator(_))) {
            return Err(Error::Validation("generator is configured with an evaluator mock profile".into()));
        }
        if matches!(self.evaluator, ChatConfig::Mock(MockSetup::Generator(_))) {
            return Err(Error::Validation("evaluator is configured with a generator mock profile".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Validation("parallelism must be at least 1".into()));
        }
        if self.tasks.is_empty() || self.strategies.is_empty() {
            return Err(Error::Validation("tasks and strategies must not be empty".into()));
        }
        if !self.strategies.contains(&self.strategy) {
            return Err(Error::Validation(format!(
                "strategy {} is not among the embedded strategies {:?}",
                self.strategy, self.strategies
            )));
        }
        self.scenario().validate()
    }

    pub fn augment_options(&self) -> AugmentOptions {
        AugmentOptions {
            tau: self.tau,
            language: self.language,
            generator_model: self.generator.model("mock-generator"),
            evaluator_model: self.evaluator.model("mock-evaluator"),
            max_output_tokens: self.max_output_tokens,
        }
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig::new(&self.components, self.strategy)
            .with_k_values(&self.k_values)
            .with_gain(self.gain)
    }
}
