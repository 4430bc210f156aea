//! Structured text generation with scoring-based regeneration.
//!
//! Each document goes through generate, score, and at most one regeneration
//! when the first score is at or below the threshold τ. The final output is
//! parsed into units and each unit is reverted to plain text.

pub mod parse;
pub mod prompts;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::llm::{ChatRequest, Gateway, PromptContext, PromptStage, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::organize::{revert_event, revert_qa, Language};

pub use parse::{parse_event_json, parse_qa_json, parse_score_json, Parsed};
pub use prompts::{build_ee_prompt, build_qag_prompt, build_regen_prompt, build_score_prompt, PROMPT_VERSION};

/// Default regeneration threshold.
pub const DEFAULT_TAU: i32 = 9;

/// Element keys of an event, in the order used for reverting to text.
pub const EVENT_KEYS: [&str; 7] = [
    "event type",
    "time",
    "location",
    "event subject",
    "event object",
    "event",
    "impact",
];

/// The four scoring criteria.
pub const CRITERIA: [&str; 4] = ["Relevance", "Clarity", "Consistency", "Completeness"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Question-answer generation.
    Qag,
    /// Event extraction.
    Ee,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Qag => "qag",
            Task::Ee => "ee",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionType {
    #[default]
    FactualInquiry,
    ExplanationAndDefinition,
    CauseAndEffect,
    ComparisonAndContrast,
    EvaluationAndOpinion,
}

impl QuestionType {
    pub const ALL: [QuestionType; 5] = [
        QuestionType::FactualInquiry,
        QuestionType::ExplanationAndDefinition,
        QuestionType::CauseAndEffect,
        QuestionType::ComparisonAndContrast,
        QuestionType::EvaluationAndOpinion,
    ];

    /// The key used in QA_json.
    pub fn label(self) -> &'static str {
        match self {
            QuestionType::FactualInquiry => "factual inquiry",
            QuestionType::ExplanationAndDefinition => "explanation and definition",
            QuestionType::CauseAndEffect => "cause and effect",
            QuestionType::ComparisonAndContrast => "comparison and contrast",
            QuestionType::EvaluationAndOpinion => "evaluation and opinion",
        }
    }

    /// Case-, whitespace-, `_`- and `-`-insensitive lookup.
    pub fn from_key(key: &str) -> Option<Self> {
        let norm = parse::normalize_key(key);
        Self::ALL.into_iter().find(|t| t.label() == norm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    #[serde(default)]
    pub question_type: QuestionType,
    pub question: String,
    pub answer: String,
}

/// One extracted event. Absent elements are `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    #[serde(default)]
    pub event_type: Option<String>,
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub event_subject: Option<String>,
    #[serde(default)]
    pub event_object: Option<String>,
    #[serde(default)]
    pub event: Option<String>,
    #[serde(default)]
    pub impact: Option<String>,
}

impl Event {
    /// Builds an event from values in [`EVENT_KEYS`] order.
    pub fn from_fields(fields: [Option<String>; 7]) -> Self {
        let [event_type, time, location, event_subject, event_object, event, impact] = fields;
        Self {
            event_type,
            time,
            location,
            event_subject,
            event_object,
            event,
            impact,
        }
    }

    /// Element values in [`EVENT_KEYS`] order.
    pub fn fields(&self) -> [Option<&str>; 7] {
        [
            self.event_type.as_deref(),
            self.time.as_deref(),
            self.location.as_deref(),
            self.event_subject.as_deref(),
            self.event_object.as_deref(),
            self.event.as_deref(),
            self.impact.as_deref(),
        ]
    }

    pub fn non_null_count(&self) -> usize {
        self.fields().iter().filter(|f| f.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.non_null_count() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deduction {
    pub deduction_reason: String,
    pub deduction_score: u32,
    pub related_content: String,
}

/// An evaluator verdict. `total_score` is always `10 - sum(deductions)`, floored at 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub total_score: u8,
    pub deductions: Vec<Deduction>,
}

impl ScoreReport {
    pub fn from_deductions(deductions: Vec<Deduction>) -> Self {
        let spent: u64 = deductions.iter().map(|d| u64::from(d.deduction_score)).sum();
        let total_score = 10u64.saturating_sub(spent) as u8;
        Self {
            total_score,
            deductions,
        }
    }

    /// A report totalling `score`, with a single Relevance deduction for the shortfall.
    pub fn constant(score: u8) -> Self {
        let score = score.min(10);
        let deductions = if score < 10 {
            vec![Deduction {
                deduction_reason: "Relevance: some content does not reflect the original text".into(),
                deduction_score: u32::from(10 - score),
                related_content: String::new(),
            }]
        } else {
            Vec::new()
        };
        Self::from_deductions(deductions)
    }

    /// The report in Score_json layout.
    pub fn to_score_json(&self) -> Value {
        let detail: Vec<Value> = self
            .deductions
            .iter()
            .map(|d| {
                json!({
                    "deduction reason": d.deduction_reason,
                    "deduction score": d.deduction_score,
                    "related content": d.related_content,
                })
            })
            .collect();
        json!({"total score": self.total_score, "detail": detail})
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UnitContent {
    Qa(QaPair),
    Event(Event),
}

/// A parsed unit and its reverted plain text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedUnit {
    pub content: UnitContent,
    /// Recomputed from `content` when empty, so imported files may omit it.
    #[serde(default)]
    pub text: String,
}

impl GeneratedUnit {
    pub fn new(content: UnitContent, language: Language) -> Result<Self> {
        let text = match &content {
            UnitContent::Qa(p) => revert_qa(p),
            UnitContent::Event(e) => revert_event(e, language)?,
        };
        Ok(Self { content, text })
    }
}

/// Parses a generator output for `task` into reverted units.
pub fn parse_units(raw: &str, task: Task, language: Language) -> Result<Parsed<Vec<GeneratedUnit>>> {
    let (contents, warnings) = match task {
        Task::Qag => {
            let p = parse_qa_json(raw)?;
            (p.value.into_iter().map(UnitContent::Qa).collect::<Vec<_>>(), p.warnings)
        }
        Task::Ee => {
            let p = parse_event_json(raw)?;
            (p.value.into_iter().map(UnitContent::Event).collect(), p.warnings)
        }
    };
    let units = contents
        .into_iter()
        .map(|c| GeneratedUnit::new(c, language))
        .collect::<Result<Vec<_>>>()?;
    Ok(Parsed {
        value: units,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    #[default]
    Ok,
    /// The final output could not be parsed; the document keeps only its original vector.
    Failed,
}

/// The outcome of augmenting one document for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub doc_id: String,
    pub task: Task,
    #[serde(default)]
    pub attempt_outputs: Vec<String>,
    /// First evaluation; absent for imported outputs.
    #[serde(default)]
    pub score: Option<ScoreReport>,
    /// Evaluation of the regenerated output, for logging only.
    #[serde(default)]
    pub rescore: Option<ScoreReport>,
    #[serde(default)]
    pub regenerated: bool,
    #[serde(default)]
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default)]
    pub units: Vec<GeneratedUnit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GenerationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }

    /// Fills in unit texts that an imported file left empty.
    pub fn fill_missing_texts(&mut self, language: Language) -> Result<()> {
        for unit in &mut self.units {
            if unit.text.is_empty() {
                unit.text = GeneratedUnit::new(unit.content.clone(), language)?.text;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOptions {
    /// Regenerate when the first score is `<= tau`. -1 disables regeneration.
    pub tau: i32,
    pub language: Language,
    pub generator_model: String,
    pub evaluator_model: String,
    pub max_output_tokens: u32,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            language: Language::En,
            generator_model: "mock-generator".into(),
            evaluator_model: "mock-evaluator".into(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl AugmentOptions {
    pub fn validate(&self) -> Result<()> {
        if !(-1..=10).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!("tau {} outside [-1, 10]", self.tau)));
        }
        Ok(())
    }
}

fn request(model: &str, prompt: String, options: &AugmentOptions, context: PromptContext) -> ChatRequest {
    ChatRequest::new(model, prompt)
        .with_max_output_tokens(options.max_output_tokens)
        .with_context(context)
}

/// Scores `generated`; an unusable verdict counts as 0 so the output is rewritten.
fn evaluate(
    doc: &Document,
    task: Task,
    generated: &str,
    options: &AugmentOptions,
    evaluator: &Gateway,
    warnings: &mut Vec<String>,
) -> Result<ScoreReport> {
    let prompt = build_score_prompt(generated, &doc.text, task);
    let ctx = PromptContext {
        stage: PromptStage::Score,
        task,
        document: doc.text.clone(),
        prior_output: Some(generated.to_string()),
    };
    let raw = evaluator.complete(&request(&options.evaluator_model, prompt, options, ctx))?.text;
    match parse_score_json(&raw) {
        Ok(p) => {
            warnings.extend(p.warnings.into_iter().map(|w| format!("score: {w}")));
            Ok(p.value)
        }
        Err(e) => {
            let msg = format!("unusable evaluator output, treated as score 0: {e}");
            warn!(doc_id = %doc.doc_id, "{msg}");
            warnings.push(msg);
            Ok(ScoreReport::constant(0))
        }
    }
}

/// Runs generate, score and the conditional single regeneration for one document.
///
/// Backend errors abort; an unparseable final output yields a record with
/// status [`RecordStatus::Failed`].
pub fn augment_document(
    doc: &Document,
    task: Task,
    options: &AugmentOptions,
    generator: &Gateway,
    evaluator: &Gateway,
) -> Result<GenerationRecord> {
    options.validate()?;
    let mut warnings = Vec::new();
    let ctx = |stage, prior: Option<&str>| PromptContext {
        stage,
        task,
        document: doc.text.clone(),
        prior_output: prior.map(str::to_string),
    };

    let first = generator
        .complete(&request(
            &options.generator_model,
            prompts::build_generate_prompt(task, &doc.text),
            options,
            ctx(PromptStage::Generate, None),
        ))?
        .text;
    let score = evaluate(doc, task, &first, options, evaluator, &mut warnings)?;
    let mut attempt_outputs = vec![first];
    let regenerated = i32::from(score.total_score) <= options.tau;
    let mut rescore = None;
    if regenerated {
        let prior = &attempt_outputs[0];
        let second = generator
            .complete(&request(
                &options.generator_model,
                build_regen_prompt(&doc.text, prior, &score, task),
                options,
                ctx(PromptStage::Regenerate, Some(prior)),
            ))?
            .text;
        rescore = Some(evaluate(doc, task, &second, options, evaluator, &mut warnings)?);
        attempt_outputs.push(second);
    }

    let last = attempt_outputs.last().expect("at least one attempt");
    let (status, failure, units) = match parse_units(last, task, options.language) {
        Ok(p) => {
            warnings.extend(p.warnings);
            (RecordStatus::Ok, None, p.value)
        }
        Err(e) => {
            warn!(doc_id = %doc.doc_id, task = %task, "augmentation failed: {e}");
            (RecordStatus::Failed, Some(e.to_string()), Vec::new())
        }
    };
    Ok(GenerationRecord {
        doc_id: doc.doc_id.clone(),
        task,
        attempt_outputs,
        score: Some(score),
        rescore,
        regenerated,
        status,
        failure,
        units,
        warnings,
    })
}

/// Augments every document on a pool of `parallelism` workers; output order
/// follows the corpus.
pub fn augment_corpus(
    corpus: &Corpus,
    task: Task,
    options: &AugmentOptions,
    generator: &Gateway,
    evaluator: &Gateway,
    parallelism: usize,
) -> Result<Vec<GenerationRecord>> {
    options.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let records: Vec<GenerationRecord> = pool.install(|| {
        corpus
            .documents()
            .par_iter()
            .map(|doc| augment_document(doc, task, options, generator, evaluator))
            .collect::<Result<Vec<_>>>()
    })?;
    let regenerated = records.iter().filter(|r| r.regenerated).count();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    info!(task = %task, docs = records.len(), regenerated, failed, "augmentation finished");
    Ok(records)
}
