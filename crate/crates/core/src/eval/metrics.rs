//! Ranking metrics over document ids and graded relevance labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::vdb::SearchHit;

/// Gain applied to a relevance grade in DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `2^rel - 1`.
    #[default]
    Exponential,
    /// `rel`.
    Linear,
}

impl Gain {
    pub fn apply(self, rel: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(rel.min(1023) as i32) - 1.0,
            Gain::Linear => f64::from(rel),
        }
    }
}

/// Walks hits in rank order, keeps each document's best-ranked vector and
/// stops after `k` distinct documents.
pub fn collapse_to_docs(hits: &[SearchHit], k: usize) -> Vec<(String, f64)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(k);
    for h in hits {
        if out.len() == k {
            break;
        }
        if seen.insert(h.doc_id.as_str()) {
            out.push((h.doc_id.clone(), h.score));
        }
    }
    out
}

fn grade(grades: &BTreeMap<String, u32>, doc: &str) -> u32 {
    grades.get(doc).copied().unwrap_or(0)
}

/// NDCG@k. `None` when the query has no positive grade.
pub fn ndcg_at_k(ranked: &[String], grades: &BTreeMap<String, u32>, k: usize, gain: Gain) -> Option<f64> {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain.apply(grade(grades, d)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.apply(g) / discount(i))
        .sum();
    (idcg > 0.0).then(|| dcg / idcg)
}

/// Reciprocal rank of the first relevant document within the top `k`.
pub fn mrr_at_k(ranked: &[String], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .position(|d| grade(grades, d) > 0)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Fraction of relevant documents found in the top `k`. `None` without any.
pub fn recall_at_k(ranked: &[String], grades: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let total = grades.values().filter(|&&g| g > 0).count();
    if total == 0 {
        return None;
    }
    let found = ranked.iter().take(k).filter(|d| grade(grades, d) > 0).count();
    Some(found as f64 / total as f64)
}

/// Relevant documents in the top `k`, divided by `k`.
pub fn precision_at_k(ranked: &[String], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let found = ranked.iter().take(k).filter(|d| grade(grades, d) > 0).count();
    found as f64 / k as f64
}
