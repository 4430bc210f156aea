//! Turning structured units back into plain text, and grouping them per document.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{Event, QaPair};
use crate::error::{Error, Result};

/// How a document's generated texts become retrieval units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Texts remain independent: one vector per generated text.
    Tri,
    /// Texts merge into one: a single vector per document and kind.
    Tmo,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Tri => "tri",
            Strategy::Tmo => "tmo",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tri" => Ok(Strategy::Tri),
            "tmo" => Ok(Strategy::Tmo),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?} (expected tri or tmo)"))),
        }
    }
}

/// Document language; only changes the separator between event elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }

    fn element_separator(self) -> &'static str {
        match self {
            Language::En => ". ",
            Language::Zh => "。",
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::InvalidArgument(format!("unknown language {other:?} (expected en or zh)"))),
        }
    }
}

/// Kind of generated unit a text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Qa,
    Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganizedTexts {
    pub doc_id: String,
    pub kind: UnitKind,
    pub strategy: Strategy,
    pub texts: Vec<String>,
}

/// Question, one space, answer. No punctuation is added.
pub fn revert_qa(pair: &QaPair) -> String {
    format!("{} {}", pair.question, pair.answer)
}

/// Non-null elements in schema order, joined by a period separator.
pub fn revert_event(event: &Event, language: Language) -> Result<String> {
    let parts: Vec<&str> = event.fields().into_iter().flatten().collect();
    if parts.is_empty() {
        return Err(Error::InvalidArgument("event has no non-null element".into()));
    }
    Ok(parts.join(language.element_separator()))
}

/// TRI keeps the list as is; TMO joins it with single spaces. Empty stays empty.
pub fn organize(units: &[String], strategy: Strategy) -> Vec<String> {
    match strategy {
        Strategy::Tri => units.to_vec(),
        Strategy::Tmo if units.is_empty() => Vec::new(),
        Strategy::Tmo => vec![units.join(" ")],
    }
}

pub fn organize_document(doc_id: &str, kind: UnitKind, units: &[String], strategy: Strategy) -> OrganizedTexts {
    OrganizedTexts {
        doc_id: doc_id.to_string(),
        kind,
        strategy,
        texts: organize(units, strategy),
    }
}
