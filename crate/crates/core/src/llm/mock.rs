//! Deterministic stand-ins for the generator and evaluator models.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, PromptStage};
use crate::augment::{self, Deduction, ScoreReport, Task};
use crate::error::{Error, Result};
use crate::text::lexical_tokens;

/// Behaviour of the mock generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum MockProfile {
    /// Well-formed output built from the input's own sentences.
    EchoOracle,
    /// Echo output, except that with the given probability every closing
    /// bracket is dropped.
    Noisy { malformed_probability: f64 },
    /// Well-formed output unrelated to the input, so the heuristic evaluator
    /// scores it low.
    AdversarialLowScore,
}

/// Behaviour of the mock evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum EvaluatorProfile {
    /// Always the same total, with one Relevance deduction for the shortfall.
    Constant { score: u8 },
    /// Rubric check: one Relevance point per unit not grounded in the input,
    /// Completeness points for an empty output, all points for unparseable JSON.
    Heuristic,
}

const COPULAS: [&str; 4] = ["is", "are", "was", "were"];

/// Splits on sentence-final punctuation (Latin or CJK), keeping the terminator.
pub(crate) fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let ends = match c {
            '。' | '！' | '？' => true,
            '.' | '!' | '?' => chars.peek().is_none_or(|n| n.is_whitespace()),
            _ => false,
        };
        if ends {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// `(subject, copula)` for sentences of the form "X is Y".
fn copula_split(sentence: &str) -> Option<(String, String)> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    for (i, w) in words.iter().enumerate().skip(1) {
        let bare = w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        if COPULAS.contains(&bare.as_str()) {
            return Some((words[..i].join(" "), bare));
        }
    }
    // CJK copula: "X是Y"
    if let Some(pos) = sentence.find('是') {
        if pos > 0 && sentence[..pos].chars().any(crate::text::is_cjk) {
            return Some((sentence[..pos].to_string(), "是".to_string()));
        }
    }
    None
}

fn question_for(subject: &str, copula: &str) -> String {
    if copula == "是" {
        format!("{subject}是什么？")
    } else {
        format!("What {copula} {subject}?")
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

fn render_qa_json(groups: &[(&str, Vec<(String, String)>)]) -> String {
    let mut out = String::from("{");
    for (gi, (key, pairs)) in groups.iter().enumerate() {
        if gi > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: [", json_str(key));
        for (pi, (q, a)) in pairs.iter().enumerate() {
            if pi > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "[{}, {}]", json_str(q), json_str(a));
        }
        out.push(']');
    }
    out.push('}');
    out
}

fn render_event_json(events: &[[Option<String>; 7]]) -> String {
    let mut out = String::from("[");
    for (ei, ev) in events.iter().enumerate() {
        if ei > 0 {
            out.push_str(", ");
        }
        out.push('{');
        for (ki, (key, value)) in augment::EVENT_KEYS.iter().zip(ev).enumerate() {
            if ki > 0 {
                out.push_str(", ");
            }
            let v = value.as_deref().map_or_else(|| "null".to_string(), json_str);
            let _ = write!(out, "{}: {v}", json_str(key));
        }
        out.push('}');
    }
    out.push(']');
    out
}

fn echo_oracle(document_text: &str, task: Task) -> String {
    let sents = sentences(document_text);
    let mut with_copula: Vec<(String, String, String)> = sents
        .iter()
        .filter_map(|s| copula_split(s).map(|(subj, cop)| (s.clone(), subj, cop)))
        .collect();
    let fallback = with_copula.is_empty();
    if fallback {
        if let Some(first) = sents.first() {
            with_copula.push((first.clone(), String::new(), String::new()));
        }
    }
    match task {
        Task::Qag => {
            let pairs = with_copula
                .into_iter()
                .map(|(s, subj, cop)| {
                    let q = if fallback {
                        "What does the text describe?".to_string()
                    } else {
                        question_for(&subj, &cop)
                    };
                    (q, s)
                })
                .collect();
            render_qa_json(&[("factual inquiry", pairs)])
        }
        Task::Ee => {
            let events: Vec<[Option<String>; 7]> = with_copula
                .into_iter()
                .map(|(s, subj, _)| {
                    [
                        Some("Statement".to_string()),
                        None,
                        None,
                        (!subj.is_empty()).then_some(subj),
                        None,
                        Some(s),
                        None,
                    ]
                })
                .collect();
            render_event_json(&events)
        }
    }
}

fn adversarial(task: Task) -> String {
    const FACTS: [(&str, &str); 5] = [
        ("What is the capital of Atlantis?", "Atlantis keeps its capital beneath the waves."),
        ("Who painted the moon green?", "A committee of owls painted the moon green in 1802."),
        ("Why do glaciers sing?", "Glaciers sing because they miss the summer."),
        ("How do teapots compare to comets?", "Teapots orbit kitchens while comets orbit stars."),
        ("Is purple the best number?", "Purple is widely considered the finest number."),
    ];
    match task {
        Task::Qag => render_qa_json(&[(
            "evaluation and opinion",
            FACTS.iter().map(|(q, a)| (q.to_string(), a.to_string())).collect(),
        )]),
        Task::Ee => {
            let events: Vec<[Option<String>; 7]> = FACTS
                .iter()
                .map(|(_, a)| [Some("Rumor".into()), None, None, None, None, Some(a.to_string()), None])
                .collect();
            render_event_json(&events)
        }
    }
}

fn stable_seed(parts: &[&[u8]], seed: u64) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write_u64(seed);
    for p in parts {
        h.write_usize(p.len());
        h.write(p);
    }
    h.finish()
}

/// Mock generator output for one document; a pure function of its arguments.
pub fn mock_generate(document_text: &str, task: Task, profile: &MockProfile, seed: u64) -> String {
    match profile {
        MockProfile::EchoOracle => echo_oracle(document_text, task),
        MockProfile::AdversarialLowScore => adversarial(task),
        MockProfile::Noisy { malformed_probability } => {
            let out = echo_oracle(document_text, task);
            let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(
                &[document_text.as_bytes(), task.as_str().as_bytes()],
                seed,
            ));
            let p = malformed_probability.clamp(0.0, 1.0);
            if rng.gen_bool(p) {
                out.chars().filter(|c| *c != '}' && *c != ']').collect()
            } else {
                out
            }
        }
    }
}

fn normalized(text: &str) -> String {
    format!(" {} ", lexical_tokens(text).join(" "))
}

/// Rubric-style scoring used by [`EvaluatorProfile::Heuristic`].
pub fn heuristic_score(generated_raw: &str, original: &str, task: Task) -> ScoreReport {
    let source = normalized(original);
    let grounded = |s: &str| {
        let n = normalized(s);
        n.trim().is_empty() || source.contains(&n)
    };
    let mut deductions = Vec::new();
    match augment::parse_units(generated_raw, task, crate::organize::Language::En) {
        Err(e) => deductions.push(Deduction {
            deduction_reason: format!("Consistency: output does not follow the required JSON format ({e})"),
            deduction_score: 10,
            related_content: generated_raw.chars().take(200).collect(),
        }),
        Ok(parsed) if parsed.value.is_empty() => deductions.push(Deduction {
            deduction_reason: "Completeness: no items were generated".into(),
            deduction_score: 3,
            related_content: String::new(),
        }),
        Ok(parsed) => {
            for unit in &parsed.value {
                let evidence = match &unit.content {
                    augment::UnitContent::Qa(p) => p.answer.as_str(),
                    augment::UnitContent::Event(e) => e.event.as_deref().unwrap_or(unit.text.as_str()),
                };
                if !grounded(evidence) {
                    deductions.push(Deduction {
                        deduction_reason: "Relevance: content does not reflect the original text".into(),
                        deduction_score: 1,
                        related_content: unit.text.clone(),
                    });
                }
            }
        }
    }
    ScoreReport::from_deductions(deductions)
}

fn render_score(report: &ScoreReport) -> String {
    serde_json::to_string(&report.to_score_json()).expect("score serialization cannot fail")
}

type ScriptFn = dyn Fn(&ChatRequest) -> Result<String> + Send + Sync;

enum Behavior {
    Canned(HashMap<String, String>),
    Generator { profile: MockProfile, seed: u64 },
    Evaluator(EvaluatorProfile),
    Scripted(Arc<ScriptFn>),
}

/// In-process [`ChatBackend`]; referentially transparent except for `scripted`
/// closures that choose otherwise.
pub struct MockBackend {
    id: String,
    behavior: Behavior,
}

impl MockBackend {
    /// Answers prompts from a fixed map; unknown prompts yield an empty completion.
    pub fn canned<K: Into<String>, V: Into<String>>(map: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            id: "mock:canned".into(),
            behavior: Behavior::Canned(map.into_iter().map(|(k, v)| (k.into(), v.into())).collect()),
        }
    }

    pub fn generator(profile: MockProfile, seed: u64) -> Self {
        Self {
            id: format!("mock:generator:{}", profile_name(&profile)),
            behavior: Behavior::Generator { profile, seed },
        }
    }

    pub fn evaluator(profile: EvaluatorProfile) -> Self {
        let id = match &profile {
            EvaluatorProfile::Constant { score } => format!("mock:evaluator:constant-{score}"),
            EvaluatorProfile::Heuristic => "mock:evaluator:heuristic".into(),
        };
        Self {
            id,
            behavior: Behavior::Evaluator(profile),
        }
    }

    pub fn scripted(f: impl Fn(&ChatRequest) -> Result<String> + Send + Sync + 'static) -> Self {
        Self {
            id: "mock:scripted".into(),
            behavior: Behavior::Scripted(Arc::new(f)),
        }
    }
}

fn profile_name(p: &MockProfile) -> &'static str {
    match p {
        MockProfile::EchoOracle => "echo-oracle",
        MockProfile::Noisy { .. } => "noisy",
        MockProfile::AdversarialLowScore => "adversarial-low-score",
    }
}

impl ChatBackend for MockBackend {
    fn backend_id(&self) -> String {
        self.id.clone()
    }

    fn send(&self, request: &ChatRequest) -> Result<String> {
        match &self.behavior {
            Behavior::Canned(map) => Ok(map.get(&request.user_prompt).cloned().unwrap_or_default()),
            Behavior::Scripted(f) => f(request),
            Behavior::Generator { profile, seed } => {
                let ctx = request
                    .context
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("mock generator needs a prompt context".into()))?;
                match ctx.stage {
                    PromptStage::Generate => Ok(mock_generate(&ctx.document, ctx.task, profile, *seed)),
                    PromptStage::Regenerate => {
                        // A rewrite: adversarial output gets fixed, noisy output is re-rolled.
                        let profile = match profile {
                            MockProfile::AdversarialLowScore => &MockProfile::EchoOracle,
                            p => p,
                        };
                        Ok(mock_generate(&ctx.document, ctx.task, profile, seed.wrapping_add(1)))
                    }
                    PromptStage::Score => Err(Error::InvalidArgument(
                        "mock generator cannot answer a scoring prompt".into(),
                    )),
                }
            }
            Behavior::Evaluator(profile) => {
                let ctx = request
                    .context
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("mock evaluator needs a prompt context".into()))?;
                let report = match profile {
                    EvaluatorProfile::Constant { score } => ScoreReport::constant(*score),
                    EvaluatorProfile::Heuristic => {
                        heuristic_score(ctx.prior_output.as_deref().unwrap_or(""), &ctx.document, ctx.task)
                    }
                };
                Ok(render_score(&report))
            }
        }
    }
}
