//! Retrieval over component subsets and the seven-scenario ablation grid.

mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::Qrels;
use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::organize::Strategy;
use crate::vdb::{VectorKind, VectorStore};

pub use metrics::{collapse_to_docs, mrr_at_k, ndcg_at_k, precision_at_k, recall_at_k, Gain};

pub const DEFAULT_K_VALUES: [usize; 2] = [1, 10];

/// The seven component combinations, in reporting order.
pub const ABLATION_SCENARIOS: [&[VectorKind]; 7] = [
    &[VectorKind::Original],
    &[VectorKind::Qa],
    &[VectorKind::Event],
    &[VectorKind::Original, VectorKind::Qa],
    &[VectorKind::Original, VectorKind::Event],
    &[VectorKind::Qa, VectorKind::Event],
    &[VectorKind::Original, VectorKind::Qa, VectorKind::Event],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub components: Vec<VectorKind>,
    pub strategy: Strategy,
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub gain: Gain,
}

impl ScenarioConfig {
    pub fn new(components: &[VectorKind], strategy: Strategy) -> Self {
        Self {
            components: components.to_vec(),
            strategy,
            k_values: DEFAULT_K_VALUES.to_vec(),
            gain: Gain::default(),
        }
    }

    pub fn with_k_values(mut self, k_values: &[usize]) -> Self {
        self.k_values = k_values.to_vec();
        self
    }

    pub fn with_gain(mut self, gain: Gain) -> Self {
        self.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidArgument("a scenario needs at least one component".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidArgument("k values must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    /// "Original+QA"-style label.
    pub fn name(&self) -> String {
        let mut kinds = self.components.clone();
        kinds.sort();
        kinds.dedup();
        kinds
            .iter()
            .map(|k| match k {
                VectorKind::Original => "Original",
                VectorKind::Qa => "QA",
                VectorKind::Event => "Event",
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    /// The vectors this scenario searches: selected kinds, with generated
    /// vectors restricted to the configured strategy.
    pub fn select(&self, store: &VectorStore) -> VectorStore {
        let mut out = store.subset(&self.components);
        if out.entries().iter().any(|e| e.strategy.is_some_and(|s| s != self.strategy)) {
            let mut filtered = VectorStore::new(store.dim());
            for e in out.entries().iter().filter(|e| e.strategy.is_none_or(|s| s == self.strategy)) {
                filtered.insert(e.clone()).expect("entries of a valid store");
            }
            out = filtered;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedQuery {
    pub query_id: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    /// Top documents, best first, up to the largest k.
    pub ranking: Vec<String>,
    /// Keys like `ndcg@10`.
    pub metrics: BTreeMap<String, f64>,
    pub relevant_at_1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario_name: String,
    pub scenario: ScenarioConfig,
    /// Means over evaluated queries.
    pub aggregates: BTreeMap<String, f64>,
    pub per_query: Vec<QueryMetrics>,
    /// Queries without any positive label; excluded from the means.
    pub skipped_queries: Vec<String>,
    pub sim_count: u64,
    pub vector_count: usize,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).copied()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One row per evaluated query, one column per metric.
    pub fn write_per_query_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let names = metric_names(&self.scenario.k_values);
        let mut header = vec!["query_id".to_string()];
        header.extend(names.iter().cloned());
        header.push("top_doc".into());
        w.write_record(&header).map_err(csv_err)?;
        for q in &self.per_query {
            let mut row = vec![q.query_id.clone()];
            row.extend(names.iter().map(|n| format!("{:.6}", q.metrics.get(n).copied().unwrap_or(0.0))));
            row.push(q.ranking.first().cloned().unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn metric_names(k_values: &[usize]) -> Vec<String> {
    let mut names = Vec::new();
    for prefix in ["ndcg", "mrr", "recall", "precision"] {
        for k in k_values {
            names.push(format!("{prefix}@{k}"));
        }
    }
    names
}

fn evaluate_query(
    store: &VectorStore,
    query: &EmbeddedQuery,
    grades: &BTreeMap<String, u32>,
    config: &ScenarioConfig,
    fetch: usize,
    k_max: usize,
) -> Result<QueryMetrics> {
    let hits = store.search(&query.embedding, fetch)?;
    let ranking: Vec<String> = collapse_to_docs(&hits, k_max).into_iter().map(|(d, _)| d).collect();
    let mut metrics = BTreeMap::new();
    for &k in &config.k_values {
        metrics.insert(
            format!("ndcg@{k}"),
            ndcg_at_k(&ranking, grades, k, config.gain).expect("query has a positive label"),
        );
        metrics.insert(format!("mrr@{k}"), mrr_at_k(&ranking, grades, k));
        metrics.insert(
            format!("recall@{k}"),
            recall_at_k(&ranking, grades, k).expect("query has a positive label"),
        );
        metrics.insert(format!("precision@{k}"), precision_at_k(&ranking, grades, k));
    }
    let relevant_at_1 = ranking.first().is_some_and(|d| grades.get(d).is_some_and(|&g| g > 0));
    Ok(QueryMetrics {
        query_id: query.query_id.clone(),
        ranking,
        metrics,
        relevant_at_1,
    })
}

/// Searches the scenario's vectors for every query and scores the collapsed
/// document rankings.
pub fn run_scenario(
    config: &ScenarioConfig,
    store: &VectorStore,
    queries: &[EmbeddedQuery],
    qrels: &Qrels,
) -> Result<EvalReport> {
    config.validate()?;
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no queries to evaluate".into()));
    }
    let scenario_store = config.select(store);
    if scenario_store.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "scenario {} ({}) selects no vectors from the index",
            config.name(),
            config.strategy
        )));
    }

    let mut evaluable = Vec::new();
    let mut skipped_queries = Vec::new();
    for q in queries {
        match qrels.for_query(&q.query_id) {
            Some(g) if g.values().any(|&v| v > 0) => evaluable.push((q, g)),
            _ => skipped_queries.push(q.query_id.clone()),
        }
    }
    if evaluable.is_empty() {
        return Err(Error::InvalidArgument("no query has a positive relevance label".into()));
    }
    if !skipped_queries.is_empty() {
        warn!(count = skipped_queries.len(), "queries without positive labels are excluded");
    }

    let k_max = *config.k_values.iter().max().expect("validated non-empty");
    let fetch = k_max
        .saturating_mul(scenario_store.max_vectors_per_doc())
        .clamp(1, scenario_store.len());
    let mut per_query: Vec<QueryMetrics> = evaluable
        .par_iter()
        .map(|(q, g)| evaluate_query(&scenario_store, q, g, config, fetch, k_max))
        .collect::<Result<_>>()?;
    per_query.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    skipped_queries.sort();

    let n = per_query.len() as f64;
    let aggregates = metric_names(&config.k_values)
        .into_iter()
        .map(|name| {
            let sum: f64 = per_query.iter().map(|q| q.metrics[&name]).sum();
            (name, sum / n)
        })
        .collect();

    Ok(EvalReport {
        scenario_name: config.name(),
        scenario: config.clone(),
        aggregates,
        per_query,
        skipped_queries,
        sim_count: scenario_store.sim_count(),
        vector_count: scenario_store.len(),
    })
}

/// Top `k` distinct documents for one query, with their best vector score.
pub fn rank_documents(store: &VectorStore, query: &Embedding, k: usize) -> Result<Vec<(String, f64)>> {
    if store.is_empty() {
        return Err(Error::InvalidArgument("cannot rank against an empty store".into()));
    }
    let fetch = k.saturating_mul(store.max_vectors_per_doc()).clamp(1, store.len());
    let hits = store.search(query, fetch)?;
    Ok(collapse_to_docs(&hits, k))
}

/// All seven scenarios, in [`ABLATION_SCENARIOS`] order.
pub fn run_ablation(
    store: &VectorStore,
    queries: &[EmbeddedQuery],
    qrels: &Qrels,
    strategy: Strategy,
    k_values: &[usize],
    gain: Gain,
) -> Result<Vec<EvalReport>> {
    ABLATION_SCENARIOS
        .iter()
        .map(|components| {
            let config = ScenarioConfig::new(components, strategy)
                .with_k_values(k_values)
                .with_gain(gain);
            run_scenario(&config, store, queries, qrels)
        })
        .collect()
}

/// Fractions of shared queries where `a` has a relevant document at rank 1
/// and `b` does not, and the reverse.
pub fn recall1_winloss(a: &EvalReport, b: &EvalReport) -> Result<(f64, f64)> {
    let b_by_id: BTreeMap<&str, bool> = b.per_query.iter().map(|q| (q.query_id.as_str(), q.relevant_at_1)).collect();
    let (mut shared, mut wins, mut losses) = (0usize, 0usize, 0usize);
    for q in &a.per_query {
        if let Some(&other) = b_by_id.get(q.query_id.as_str()) {
            shared += 1;
            match (q.relevant_at_1, other) {
                (true, false) => wins += 1,
                (false, true) => losses += 1,
                _ => {}
            }
        }
    }
    if shared == 0 {
        return Err(Error::InvalidArgument("the two reports share no query".into()));
    }
    Ok((wins as f64 / shared as f64, losses as f64 / shared as f64))
}

/// A fixed-width table with one row per scenario.
pub fn format_ablation_table(reports: &[EvalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let cols: Vec<String> = first.scenario.k_values.iter().map(|k| format!("ndcg@{k}")).collect();
    let mut out = format!("{:<20} {:>8}", "scenario", "vectors");
    for c in &cols {
        let _ = write!(out, " {c:>10}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<20} {:>8}", r.scenario_name, r.vector_count);
        for c in &cols {
            let _ = write!(out, " {:>10.4}", r.metric(c).unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

/// The ablation grid as CSV: scenario, strategy, vectors, sims, then every metric.
pub fn write_ablation_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let names = reports.first().map(|r| metric_names(&r.scenario.k_values)).unwrap_or_default();
    let mut header: Vec<String> = ["scenario", "strategy", "vectors", "sim_count"].map(String::from).to_vec();
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![
            r.scenario_name.clone(),
            r.scenario.strategy.to_string(),
            r.vector_count.to_string(),
            r.sim_count.to_string(),
        ];
        row.extend(names.iter().map(|n| format!("{:.6}", r.metric(n).unwrap_or(f64::NAN))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::QrelEntry;
    use crate::vdb::VectorEntry;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec())
    }

    fn qrels(pairs: &[(&str, &str, u32)]) -> Qrels {
        Qrels::from_entries(pairs.iter().map(|(q, d, r)| QrelEntry {
            query_id: q.to_string(),
            doc_id: d.to_string(),
            relevance: *r,
        }))
        .unwrap()
    }

    fn q(id: &str, v: &[f32]) -> EmbeddedQuery {
        EmbeddedQuery {
            query_id: id.into(),
            embedding: emb(v),
        }
    }

    /// d1 has three generated vectors close to the query, d2 one original.
    fn crowded_store() -> VectorStore {
        let mut s = VectorStore::new(3);
        s.insert(VectorEntry::original("d1", emb(&[0.0, 0.0, 1.0]))).unwrap();
        s.insert(VectorEntry::original("d2", emb(&[0.6, 0.8, 0.0]))).unwrap();
        for i in 0..3 {
            s.insert(VectorEntry::generated("d1", VectorKind::Qa, Strategy::Tri, i, emb(&[1.0, 0.1 * i as f32, 0.0])))
                .unwrap();
        }
        s
    }

    #[test]
    fn collapsed_ranking_never_repeats_a_document() {
        let s = crowded_store();
        let config = ScenarioConfig::new(&[VectorKind::Original, VectorKind::Qa], Strategy::Tri).with_k_values(&[2]);
        let r = run_scenario(&config, &s, &[q("q1", &[1.0, 0.0, 0.0])], &qrels(&[("q1", "d2", 1)])).unwrap();
        assert_eq!(r.per_query[0].ranking, ["d1", "d2"]);
        assert_eq!(r.vector_count, 5);
        assert_eq!(r.sim_count, 5);
    }

    #[test]
    fn original_scenario_matches_baseline_store() {
        let s = crowded_store();
        let baseline = s.subset(&[VectorKind::Original]);
        let config = ScenarioConfig::new(&[VectorKind::Original], Strategy::Tmo);
        let queries = [q("q1", &[1.0, 0.0, 0.0]), q("q2", &[0.0, 0.0, 1.0])];
        let rels = qrels(&[("q1", "d2", 1), ("q2", "d1", 2)]);
        let a = run_scenario(&config, &s, &queries, &rels).unwrap();
        let b = run_scenario(&config, &baseline, &queries, &rels).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metric("ndcg@1"), Some(1.0));
    }

    #[test]
    fn strategy_filters_generated_vectors() {
        let mut s = crowded_store();
        s.insert(VectorEntry::generated("d2", VectorKind::Qa, Strategy::Tmo, 0, emb(&[1.0, 0.0, 0.0])))
            .unwrap();
        let tri = ScenarioConfig::new(&[VectorKind::Qa], Strategy::Tri);
        let tmo = ScenarioConfig::new(&[VectorKind::Qa], Strategy::Tmo);
        assert_eq!(tri.select(&s).len(), 3);
        assert_eq!(tmo.select(&s).len(), 1);
    }

    #[test]
    fn unlabeled_queries_are_skipped_and_empty_sets_rejected() {
        let s = crowded_store();
        let config = ScenarioConfig::new(&[VectorKind::Original], Strategy::Tri);
        let rels = qrels(&[("q1", "d1", 1), ("q2", "d1", 0)]);
        let r = run_scenario(&config, &s, &[q("q1", &[0.0, 0.0, 1.0]), q("q2", &[1.0, 0.0, 0.0])], &rels).unwrap();
        assert_eq!(r.per_query.len(), 1);
        assert_eq!(r.skipped_queries, ["q2"]);
        assert!(run_scenario(&config, &s, &[], &rels).is_err());
        let empty = ScenarioConfig::new(&[VectorKind::Event], Strategy::Tri);
        assert!(run_scenario(&empty, &s, &[q("q1", &[1.0, 0.0, 0.0])], &rels).is_err());
    }

    #[test]
    fn ablation_order_and_names() {
        let names: Vec<String> = ABLATION_SCENARIOS
            .iter()
            .map(|c| ScenarioConfig::new(c, Strategy::Tri).name())
            .collect();
        assert_eq!(
            names,
            ["Original", "QA", "Event", "Original+QA", "Original+Event", "QA+Event", "Original+QA+Event"]
        );
    }

    #[test]
    fn winloss_examples() {
        let s = crowded_store();
        let rels = qrels(&[("q1", "d2", 1), ("q2", "d1", 1)]);
        let queries = [q("q1", &[0.6, 0.8, 0.0]), q("q2", &[0.0, 0.0, 1.0])];
        let perfect = run_scenario(&ScenarioConfig::new(&[VectorKind::Original], Strategy::Tri), &s, &queries, &rels).unwrap();
        assert_eq!(recall1_winloss(&perfect, &perfect).unwrap(), (0.0, 0.0));
        let mut never = perfect.clone();
        for pq in &mut never.per_query {
            pq.relevant_at_1 = false;
        }
        assert_eq!(recall1_winloss(&perfect, &never).unwrap(), (1.0, 0.0));
        assert_eq!(recall1_winloss(&never, &perfect).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn writers_produce_files() {
        let s = crowded_store();
        let dir = tempfile::tempdir().unwrap();
        let rels = qrels(&[("q1", "d2", 1)]);
        let r = run_scenario(&ScenarioConfig::new(&[VectorKind::Original], Strategy::Tri), &s, &[q("q1", &[1.0, 0.0, 0.0])], &rels)
            .unwrap();
        r.write_json(&dir.path().join("report.json")).unwrap();
        r.write_per_query_csv(&dir.path().join("per_query.csv")).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("per_query.csv")).unwrap();
        assert!(csv.starts_with("query_id,ndcg@1,ndcg@10,mrr@1"));
        let back: EvalReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(format_ablation_table(&[r]).contains("Original"));
    }
}
