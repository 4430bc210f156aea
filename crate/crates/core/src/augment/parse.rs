//! Tolerant decoding of model output into QA pairs, events and score reports.
//!
//! Models wrap JSON in prose and code fences, so every parser first looks for
//! the earliest balanced JSON value and only then applies the schema. Schema
//! problems inside a well-formed value become warnings, not errors.

use serde_json::{Map, Value};
use tracing::warn;

use super::{Deduction, Event, QaPair, QuestionType, ScoreReport, CRITERIA, EVENT_KEYS};
use crate::error::{Error, Result};

/// A decoded value plus the schema problems that were skipped over.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Parsed<T> {
    fn new(value: T, warnings: Vec<String>) -> Self {
        for w in &warnings {
            warn!("{w}");
        }
        Self { value, warnings }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Want {
    Object,
    Any,
}

/// Upper bound on candidate start positions tried per input.
const MAX_CANDIDATES: usize = 64;

/// Byte offset one past the bracket closing the one at `start`, if balanced.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The earliest balanced JSON value (object, or object/array for `Any`).
fn extract_json(raw: &str, want: Want) -> Option<Value> {
    let bytes = raw.as_bytes();
    let mut tried = 0;
    for (start, &b) in bytes.iter().enumerate() {
        let opens = match want {
            Want::Object => b == b'{',
            Want::Any => b == b'{' || b == b'[',
        };
        if !opens {
            continue;
        }
        tried += 1;
        if tried > MAX_CANDIDATES {
            break;
        }
        if let Some(end) = balanced_end(bytes, start) {
            // Brackets and quotes are ASCII, so both offsets sit on char boundaries.
            if let Ok(v) = serde_json::from_str::<Value>(&raw[start..end]) {
                return Some(v);
            }
        }
    }
    None
}

/// Lowercase, `_`/`-` as spaces, whitespace collapsed.
pub(crate) fn normalize_key(key: &str) -> String {
    key.chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn non_empty_str(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        _ => None,
    }
}

pub fn parse_qa_json(raw: &str) -> Result<Parsed<Vec<QaPair>>> {
    let value = extract_json(raw, Want::Object)
        .ok_or_else(|| Error::Structured("no JSON object found in QA output".into()))?;
    let Value::Object(map) = value else {
        unreachable!("extract_json(Object) only yields objects")
    };
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (key, val) in &map {
        let Some(question_type) = QuestionType::from_key(key) else {
            warnings.push(format!("skipping unknown question type {key:?}"));
            continue;
        };
        let Value::Array(items) = val else {
            warnings.push(format!("question type {key:?} does not hold a list"));
            continue;
        };
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::Array(pair) if pair.len() == 2 => match (non_empty_str(&pair[0]), non_empty_str(&pair[1])) {
                    (Some(question), Some(answer)) => pairs.push(QaPair {
                        question_type,
                        question,
                        answer,
                    }),
                    _ => warnings.push(format!("{key:?}[{i}]: question and answer must be non-empty strings")),
                },
                Value::Array(pair) => {
                    warnings.push(format!("{key:?}[{i}]: expected a [question, answer] pair, got {} items", pair.len()))
                }
                _ => warnings.push(format!("{key:?}[{i}]: expected a [question, answer] pair")),
            }
        }
    }
    Ok(Parsed::new(pairs, warnings))
}

fn event_field(v: &Value) -> std::result::Result<Option<String>, ()> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) => {
            let t = s.trim();
            if t.is_empty() || t.eq_ignore_ascii_case("null") || t.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                Ok(Some(t.to_string()))
            }
        }
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Bool(b) => Ok(Some(b.to_string())),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(non_empty_str).collect();
            Ok((!parts.is_empty()).then(|| parts.join(", ")))
        }
        Value::Object(_) => Err(()),
    }
}

fn event_from_object(obj: &Map<String, Value>, idx: usize, warnings: &mut Vec<String>) -> Option<Event> {
    let mut fields: [Option<String>; 7] = Default::default();
    for (key, val) in obj {
        let norm = normalize_key(key);
        let Some(slot) = EVENT_KEYS.iter().position(|k| *k == norm) else {
            warnings.push(format!("event #{idx}: ignoring unknown element {key:?}"));
            continue;
        };
        match event_field(val) {
            Ok(v) => fields[slot] = v,
            Err(()) => warnings.push(format!("event #{idx}: element {key:?} is not a scalar")),
        }
    }
    let event = Event::from_fields(fields);
    if event.is_empty() {
        warnings.push(format!("event #{idx}: every element is null, skipped"));
        return None;
    }
    Some(event)
}

pub fn parse_event_json(raw: &str) -> Result<Parsed<Vec<Event>>> {
    let value =
        extract_json(raw, Want::Any).ok_or_else(|| Error::Structured("no JSON value found in event output".into()))?;
    let mut warnings = Vec::new();
    let items: Vec<Value> = match value {
        Value::Array(items) => items,
        Value::Object(obj) => {
            let looks_like_event = obj.keys().any(|k| EVENT_KEYS.contains(&normalize_key(k).as_str()));
            if looks_like_event {
                vec![Value::Object(obj)]
            } else {
                let arrays: Vec<&Vec<Value>> = obj
                    .values()
                    .filter_map(|v| match v {
                        Value::Array(a) => Some(a),
                        _ => None,
                    })
                    .collect();
                match arrays.as_slice() {
                    [only] => (*only).clone(),
                    _ => return Err(Error::Structured("event output holds no event list".into())),
                }
            }
        }
        _ => unreachable!("extract_json(Any) only yields objects and arrays"),
    };
    let mut events = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item {
            Value::Object(obj) => events.extend(event_from_object(obj, i, &mut warnings)),
            _ => warnings.push(format!("event #{i}: expected an object")),
        }
    }
    Ok(Parsed::new(events, warnings))
}

fn as_integer(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f.round() as i64)),
        Value::String(s) => {
            let t = s.trim();
            t.parse::<i64>()
                .ok()
                .or_else(|| t.parse::<f64>().ok().filter(|f| f.is_finite()).map(|f| f.round() as i64))
        }
        _ => None,
    }
}

fn lookup<'a>(obj: &'a Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    obj.iter().find(|(k, _)| names.contains(&normalize_key(k).as_str())).map(|(_, v)| v)
}

/// Decodes Score_json. A total that disagrees with `10 - sum(deductions)` is
/// recomputed from the deductions, with a warning.
pub fn parse_score_json(raw: &str) -> Result<Parsed<ScoreReport>> {
    let Some(Value::Object(obj)) = extract_json(raw, Want::Object) else {
        return Err(Error::Structured("no JSON object found in score output".into()));
    };
    let mut warnings = Vec::new();
    let stated_total = lookup(&obj, &["total score", "totalscore", "score", "total"]).and_then(as_integer);
    let detail = lookup(&obj, &["detail", "details", "deductions"]);
    if stated_total.is_none() && detail.is_none() {
        return Err(Error::Structured("score output has neither a total score nor details".into()));
    }

    let mut deductions = Vec::new();
    match detail {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let Value::Object(d) = item else {
                    warnings.push(format!("deduction #{i}: expected an object"));
                    continue;
                };
                let reason = lookup(d, &["deduction reason", "reason"])
                    .and_then(non_empty_str)
                    .unwrap_or_default();
                let score = lookup(d, &["deduction score", "score", "points"]).and_then(as_integer);
                let related = lookup(d, &["related content", "content"])
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        Value::Null => String::new(),
                        other => other.to_string(),
                    })
                    .unwrap_or_default();
                let Some(score) = score.filter(|s| *s > 0) else {
                    warnings.push(format!("deduction #{i}: deduction score must be a positive integer, skipped"));
                    continue;
                };
                if !CRITERIA.iter().any(|c| reason.to_lowercase().contains(&c.to_lowercase())) {
                    warnings.push(format!("deduction #{i}: reason {reason:?} names none of the scoring criteria"));
                }
                deductions.push(Deduction {
                    deduction_reason: reason,
                    deduction_score: u32::try_from(score).unwrap_or(u32::MAX),
                    related_content: related,
                });
            }
        }
        Some(_) => warnings.push("score detail is not a list, ignored".into()),
    }

    let report = ScoreReport::from_deductions(deductions);
    match stated_total {
        Some(t) if t != i64::from(report.total_score) => warnings.push(format!(
            "stated total {t} disagrees with deductions; using {}",
            report.total_score
        )),
        None => warnings.push(format!("missing total score; using {}", report.total_score)),
        _ => {}
    }
    Ok(Parsed::new(report, warnings))
}
