//! Retrieval datasets: corpus documents, queries and graded relevance labels,
//! each stored as one JSON object per line.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            metadata: BTreeMap::new(),
        }
    }
}

/// Documents in file order, with unique non-empty ids and non-empty text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_documents(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if doc.doc_id.is_empty() {
                return Err(Error::Validation(format!("document #{} has an empty doc_id", i + 1)));
            }
            if doc.text.is_empty() {
                return Err(Error::Validation(format!("document {} has empty text", doc.doc_id)));
            }
            if by_id.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate doc_id {:?}", doc.doc_id)));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.by_id.contains_key(doc_id)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.docs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySet {
    queries: Vec<Query>,
    by_id: HashMap<String, usize>,
}

impl QuerySet {
    pub fn from_queries(queries: Vec<Query>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            if q.query_id.is_empty() {
                return Err(Error::Validation(format!("query #{} has an empty query_id", i + 1)));
            }
            if q.text.is_empty() {
                return Err(Error::Validation(format!("query {} has empty text", q.query_id)));
            }
            if by_id.insert(q.query_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate query_id {:?}", q.query_id)));
            }
        }
        Ok(Self { queries, by_id })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Query> {
        self.queries.iter()
    }

    pub fn get(&self, query_id: &str) -> Option<&Query> {
        self.by_id.get(query_id).map(|&i| &self.queries[i])
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.queries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelEntry {
    pub query_id: String,
    pub doc_id: String,
    pub relevance: u32,
}

/// Graded judgments keyed by query, then document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    by_query: BTreeMap<String, BTreeMap<String, u32>>,
    len: usize,
}

impl Qrels {
    pub fn from_entries(entries: impl IntoIterator<Item = QrelEntry>) -> Result<Self> {
        let mut qrels = Qrels::default();
        for e in entries {
            qrels.insert(e)?;
        }
        Ok(qrels)
    }

    pub fn insert(&mut self, entry: QrelEntry) -> Result<()> {
        let docs = self.by_query.entry(entry.query_id.clone()).or_default();
        if docs.insert(entry.doc_id.clone(), entry.relevance).is_some() {
            return Err(Error::Validation(format!(
                "duplicate qrel for ({:?}, {:?})",
                entry.query_id, entry.doc_id
            )));
        }
        self.len += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Judgments for one query; empty when the query is unjudged.
    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.by_query.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = QrelEntry> + '_ {
        self.by_query.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &r)| QrelEntry {
                query_id: q.clone(),
                doc_id: d.clone(),
                relevance: r,
            })
        })
    }

    /// Cross-file references are checked lazily: unknown ids only warn, since
    /// evaluation over a sampled corpus scores them as never retrieved.
    pub fn check_references(&self, corpus: &Corpus, queries: &QuerySet) -> Vec<String> {
        let mut warnings = Vec::new();
        for (q, docs) in &self.by_query {
            if queries.get(q).is_none() {
                warnings.push(format!("qrels reference unknown query_id {q:?}"));
            }
            for d in docs.keys() {
                if !corpus.contains(d) {
                    warnings.push(format!("qrels for {q:?} reference unknown doc_id {d:?}"));
                }
            }
        }
        for w in &warnings {
            warn!("{w}");
        }
        warnings
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let entries: Vec<QrelEntry> = self.entries().collect();
        jsonl::write(path, &entries)
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let docs: Vec<(usize, Document)> = jsonl::read(path)?;
    let mut seen = HashMap::new();
    for (line, d) in &docs {
        if let Some(prev) = seen.insert(d.doc_id.as_str(), *line) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate doc_id {:?} (first seen on line {prev})",
                path.display(),
                d.doc_id
            )));
        }
    }
    Corpus::from_documents(docs.into_iter().map(|(_, d)| d).collect())
}

pub fn load_queries(path: &Path) -> Result<QuerySet> {
    let queries: Vec<(usize, Query)> = jsonl::read(path)?;
    QuerySet::from_queries(queries.into_iter().map(|(_, q)| q).collect())
}

/// Accepts integer grades written as JSON numbers or numeric strings.
#[derive(Deserialize)]
struct RawQrel {
    query_id: String,
    doc_id: String,
    relevance: serde_json::Value,
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let raw: Vec<(usize, RawQrel)> = jsonl::read(path)?;
    let mut qrels = Qrels::default();
    for (line, r) in raw {
        let grade = match &r.relevance {
            serde_json::Value::Number(n) => n.as_i64(),
            serde_json::Value::String(s) => s.trim().parse::<i64>().ok(),
            _ => None,
        }
        .ok_or_else(|| {
            Error::Validation(format!(
                "{}:{line}: relevance must be an integer, got {}",
                path.display(),
                r.relevance
            ))
        })?;
        let relevance = u32::try_from(grade).map_err(|_| {
            Error::Validation(format!(
                "{}:{line}: relevance must be a non-negative integer, got {grade}",
                path.display()
            ))
        })?;
        qrels
            .insert(QrelEntry {
                query_id: r.query_id,
                doc_id: r.doc_id,
                relevance,
            })
            .map_err(|e| Error::Validation(format!("{}:{line}: {e}", path.display())))?;
    }
    Ok(qrels)
}

/// Uniform sample without replacement; the kept documents stay in corpus order.
pub fn sample_subset(corpus: &Corpus, size: usize, seed: u64) -> Result<Corpus> {
    if size > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {size} exceeds corpus size {}",
            corpus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, corpus.len(), size).into_vec();
    picked.sort_unstable();
    Corpus::from_documents(picked.into_iter().map(|i| corpus.docs[i].clone()).collect())
}
