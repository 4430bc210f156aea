//! Flat vector store with exact cosine search.
//!
//! Every entry remembers which document it came from and whether it is an
//! original, QA or event vector, so a single store can be split back into
//! its components for ablation runs.

mod persist;

use std::cmp::Ordering as CmpOrdering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::organize::{Strategy, UnitKind};

pub use persist::{INDEX_FILE, META_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Original,
    Qa,
    Event,
}

impl VectorKind {
    pub const ALL: [VectorKind; 3] = [VectorKind::Original, VectorKind::Qa, VectorKind::Event];

    pub fn as_str(self) -> &'static str {
        match self {
            VectorKind::Original => "original",
            VectorKind::Qa => "qa",
            VectorKind::Event => "event",
        }
    }
}

impl From<UnitKind> for VectorKind {
    fn from(k: UnitKind) -> Self {
        match k {
            UnitKind::Qa => VectorKind::Qa,
            UnitKind::Event => VectorKind::Event,
        }
    }
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub vector_id: String,
    pub embedding: Embedding,
    pub doc_id: String,
    pub kind: VectorKind,
    /// `None` for original vectors.
    pub strategy: Option<Strategy>,
    /// Position within the document's generated set.
    pub unit_index: Option<u32>,
}

impl VectorEntry {
    pub fn original(doc_id: impl Into<String>, embedding: Embedding) -> Self {
        let doc_id = doc_id.into();
        Self {
            vector_id: format!("ori:{doc_id}"),
            embedding,
            doc_id,
            kind: VectorKind::Original,
            strategy: None,
            unit_index: None,
        }
    }

    /// A generated vector; the id encodes kind, strategy, document and unit index.
    pub fn generated(
        doc_id: impl Into<String>,
        kind: VectorKind,
        strategy: Strategy,
        unit_index: u32,
        embedding: Embedding,
    ) -> Self {
        let doc_id = doc_id.into();
        Self {
            vector_id: format!("{kind}:{strategy}:{doc_id}:{unit_index}"),
            embedding,
            doc_id,
            kind,
            strategy: Some(strategy),
            unit_index: Some(unit_index),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vector_id.is_empty() {
            return Err(Error::Validation("empty vector_id".into()));
        }
        if self.kind == VectorKind::Original && (self.strategy.is_some() || self.unit_index.is_some()) {
            return Err(Error::Validation(format!(
                "original vector {} must not carry a strategy or unit index",
                self.vector_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub vector_id: String,
    pub doc_id: String,
    pub kind: VectorKind,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// An append-only collection of vectors of one dimension.
#[derive(Debug)]
pub struct VectorStore {
    dim: usize,
    entries: Vec<VectorEntry>,
    ids: HashSet<String>,
    sim_count: AtomicU64,
}

impl Clone for VectorStore {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.clone(),
            ids: self.ids.clone(),
            sim_count: AtomicU64::new(self.sim_count()),
        }
    }
}

impl PartialEq for VectorStore {
    /// Compares contents only, not counters.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            ids: HashSet::new(),
            sim_count: AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VectorEntry] {
        &self.entries
    }

    pub fn insert(&mut self, entry: VectorEntry) -> Result<()> {
        entry.validate()?;
        if entry.embedding.dim() != self.dim {
            return Err(Error::Validation(format!(
                "vector {} has dimension {}, store expects {}",
                entry.vector_id,
                entry.embedding.dim(),
                self.dim
            )));
        }
        if !self.ids.insert(entry.vector_id.clone()) {
            return Err(Error::Validation(format!("duplicate vector_id {}", entry.vector_id)));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Union of several stores. Fails on a dimension clash or a repeated id.
    pub fn compose<'a>(stores: impl IntoIterator<Item = &'a VectorStore>) -> Result<VectorStore> {
        let mut iter = stores.into_iter().peekable();
        let dim = iter
            .peek()
            .map(|s| s.dim)
            .ok_or_else(|| Error::InvalidArgument("compose needs at least one store".into()))?;
        let mut out = VectorStore::new(dim);
        for store in iter {
            for e in &store.entries {
                out.insert(e.clone())?;
            }
        }
        Ok(out)
    }

    /// The entries whose kind is in `kinds`, in their original order.
    pub fn subset(&self, kinds: &[VectorKind]) -> VectorStore {
        let mut out = VectorStore::new(self.dim);
        for e in self.entries.iter().filter(|e| kinds.contains(&e.kind)) {
            out.ids.insert(e.vector_id.clone());
            out.entries.push(e.clone());
        }
        out
    }

    /// Largest number of vectors sharing one doc_id.
    pub fn max_vectors_per_doc(&self) -> usize {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for e in &self.entries {
            *counts.entry(e.doc_id.as_str()).or_default() += 1;
        }
        counts.into_values().max().unwrap_or(0)
    }

    pub fn sim_count(&self) -> u64 {
        self.sim_count.load(Ordering::Relaxed)
    }

    pub fn reset_sim_count(&self) {
        self.sim_count.store(0, Ordering::Relaxed);
    }

    /// Exact top-`k` by cosine, ties broken by ascending vector_id. Asking for
    /// more hits than entries returns the full ranking. Every call adds the
    /// store size to the similarity counter.
    pub fn search(&self, query: &Embedding, k: usize) -> Result<Vec<SearchHit>> {
        if self.entries.is_empty() {
            return Err(Error::InvalidArgument("search on an empty store".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "query has dimension {}, store expects {}",
                query.dim(),
                self.dim
            )));
        }
        if query.norm() == 0.0 {
            return Err(Error::InvalidArgument("zero-norm query vector".into()));
        }

        let qn = query.norm();
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let n = e.embedding.norm();
                let s = if n == 0.0 { 0.0 } else { query.dot(&e.embedding) / (qn * n) };
                (s, i)
            })
            .collect();
        self.sim_count.fetch_add(self.entries.len() as u64, Ordering::Relaxed);

        let by_rank = |a: &(f64, usize), b: &(f64, usize)| -> CmpOrdering {
            b.0.total_cmp(&a.0)
                .then_with(|| self.entries[a.1].vector_id.cmp(&self.entries[b.1].vector_id))
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_rank);

        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (score, i))| {
                let e = &self.entries[i];
                SearchHit {
                    vector_id: e.vector_id.clone(),
                    doc_id: e.doc_id.clone(),
                    kind: e.kind,
                    score,
                    rank: r + 1,
                }
            })
            .collect())
    }
}
