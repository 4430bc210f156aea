//! Stage runners. Each stage reads earlier stages' files from the output
//! directory, writes its own, and leaves a `manifest.<stage>.json` behind.
//!
//! ```text
//! ingest -> augment -> embed -> index -> retrieve | eval | ablate
//! ```

mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

use crate::analysis::{self, DiversityScores, NoiseSpec, UnitCountStats};
use crate::augment::{augment_corpus, GenerationRecord, Task, PROMPT_VERSION};
use crate::config::RunConfig;
use crate::corpus::{load_corpus, load_qrels, load_queries, sample_subset, Corpus, Document};
use crate::embed::embed_texts;
use crate::error::{Error, Result};
use crate::eval::{rank_documents, run_ablation, run_scenario, write_ablation_csv, EmbeddedQuery, EvalReport};
use crate::jsonl;
use crate::organize::organize;
use crate::vdb::{VectorEntry, VectorKind, VectorStore, INDEX_FILE, META_FILE};

pub use manifest::{chain_hash, sha256_bytes, sha256_file, Manifest};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const QRELS_FILE: &str = "qrels.jsonl";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const VECTORS_FILE: &str = "vectors.jsonl";
pub const QUERY_VECTORS_FILE: &str = "queries.emb.jsonl";
pub const INDEX_DIR: &str = "index";
pub const RUN_FILE: &str = "run.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const PER_QUERY_FILE: &str = "per_query.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_JSON: &str = "ablation.json";
pub const COUNTS_CSV: &str = "counts.csv";
pub const DIVERSITY_CSV: &str = "diversity.csv";
pub const NOISE_CSV: &str = "noise.csv";

type GeneratedSlot = (VectorKind, crate::organize::Strategy, u32);

/// Noise levels used when none are given.
pub const DEFAULT_NOISE_LEVELS: [f64; 3] = [0.2, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Augment,
    Embed,
    Index,
    Retrieve,
    Eval,
    Ablate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Augment => "augment",
            Stage::Embed => "embed",
            Stage::Index => "index",
            Stage::Retrieve => "retrieve",
            Stage::Eval => "eval",
            Stage::Ablate => "ablate",
        }
    }
}

/// One line of `run.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLine {
    pub query_id: String,
    pub results: Vec<RunHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHit {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// One row of the noise table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub percentage: f64,
    pub task: Task,
    pub documents: usize,
    pub noise_tokens: usize,
    pub retained_tokens: usize,
    pub retained_fraction: f64,
}

pub struct Pipeline {
    config: RunConfig,
    out: PathBuf,
    force: bool,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Validation(format!("{}: {e}", path.display()))
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let out = config.paths.output_dir.clone();
        Ok(Self {
            config,
            out,
            force: false,
        })
    }

    /// Let consumers of the index proceed on a configuration mismatch.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let path = self.path(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::MissingArtifact { path, stage })
        }
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    fn stage_config(&self, stage: Stage) -> Value {
        let c = &self.config;
        match stage {
            Stage::Ingest => json!({"seed": c.seed, "sample_size": c.sample_size}),
            Stage::Augment => json!({
                "seed": c.seed,
                "tau": c.tau,
                "tasks": c.tasks,
                "language": c.language,
                "max_output_tokens": c.max_output_tokens,
                "generator": c.generator,
                "evaluator": c.evaluator,
                "prompt_version": PROMPT_VERSION,
            }),
            Stage::Embed => json!({"embedder": c.embedder, "strategies": c.strategies, "language": c.language}),
            Stage::Index => json!({}),
            Stage::Retrieve | Stage::Eval | Stage::Ablate => json!({
                "strategy": c.strategy,
                "components": c.components,
                "k_values": c.k_values,
                "gain": c.gain,
            }),
        }
    }

    fn snapshot(&self) -> Value {
        let mut v = serde_json::to_value(&self.config).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut v {
            m.remove("paths");
        }
        v
    }

    fn hash_files(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| Ok((n.to_string(), sha256_file(&self.path(n))?)))
            .collect()
    }

    fn write_manifest(
        &self,
        stage: &str,
        upstream: Option<String>,
        stage_config: Value,
        backends: BTreeMap<String, String>,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
    ) -> Result<Manifest> {
        let m = Manifest {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: chain_hash(upstream.as_deref(), stage, &stage_config),
            upstream_config_hash: upstream,
            seed: self.config.seed,
            stage_config,
            config: self.snapshot(),
            backends,
            inputs,
            outputs,
        };
        m.write(&self.out)?;
        Ok(m)
    }

    fn upstream_hash(&self, stage: &'static str) -> Result<String> {
        Ok(Manifest::read(&self.out, stage)?.config_hash)
    }

    /// Hash the index would carry had every stage since ingest run with the
    /// current configuration.
    pub fn expected_index_hash(&self) -> Result<String> {
        let augment = Manifest::read(&self.out, "augment")?;
        // Imported generations do not depend on the generation settings.
        let mut h = if augment.stage_config.get("import").is_some() {
            augment.config_hash
        } else {
            chain_hash(Some(&self.upstream_hash("ingest")?), "augment", &self.stage_config(Stage::Augment))
        };
        for s in [Stage::Embed, Stage::Index] {
            h = chain_hash(Some(&h), s.name(), &self.stage_config(s));
        }
        Ok(h)
    }

    fn check_index_config(&self) -> Result<String> {
        let found = self.upstream_hash("index")?;
        let expected = self.expected_index_hash()?;
        if found != expected {
            let err = Error::ConfigMismatch {
                path: self.path(&Manifest::file_name("index")),
                expected,
                found: found.clone(),
            };
            if !self.force {
                return Err(err);
            }
            warn!("{err}; continuing because of --force");
        }
        Ok(found)
    }

    pub fn ingest(&self) -> Result<Corpus> {
        let p = &self.config.paths;
        let need = |o: &Option<PathBuf>, what: &str| {
            o.clone()
                .ok_or_else(|| Error::Validation(format!("paths.{what} is not set (config file or --{what})")))
        };
        let (cp, qp, rp) = (need(&p.corpus, "corpus")?, need(&p.queries, "queries")?, need(&p.qrels, "qrels")?);
        let mut corpus = load_corpus(&cp)?;
        if let Some(n) = self.config.sample_size {
            corpus = sample_subset(&corpus, n, self.config.seed)?;
        }
        let queries = load_queries(&qp)?;
        let qrels = load_qrels(&rp)?;
        qrels.check_references(&corpus, &queries);

        self.ensure_out()?;
        corpus.write_jsonl(&self.path(CORPUS_FILE))?;
        queries.write_jsonl(&self.path(QUERIES_FILE))?;
        qrels.write_jsonl(&self.path(QRELS_FILE))?;

        let inputs: BTreeMap<String, String> = [("corpus", &cp), ("queries", &qp), ("qrels", &rp)]
            .into_iter()
            .map(|(k, path)| Ok((k.to_string(), sha256_file(path)?)))
            .collect::<Result<_>>()?;
        let mut cfg = self.stage_config(Stage::Ingest);
        cfg["inputs"] = json!(inputs);
        let outputs = self.hash_files(&[CORPUS_FILE, QUERIES_FILE, QRELS_FILE])?;
        self.write_manifest("ingest", None, cfg, BTreeMap::new(), inputs, outputs)?;
        info!(documents = corpus.len(), queries = queries.len(), qrels = qrels.len(), "ingested");
        Ok(corpus)
    }

    fn load_ingested_corpus(&self) -> Result<Corpus> {
        load_corpus(&self.require(CORPUS_FILE, "ingest")?)
    }

    pub fn augment(&self) -> Result<Vec<GenerationRecord>> {
        let corpus = self.load_ingested_corpus()?;
        let c = &self.config;
        let generator = c.generator.gateway(c.seed, &c.retry, c.parallelism)?;
        let evaluator = c.evaluator.gateway(c.seed, &c.retry, c.parallelism)?;
        let options = c.augment_options();
        let mut records = Vec::new();
        for &task in &c.tasks {
            records.extend(augment_corpus(&corpus, task, &options, &generator, &evaluator, c.parallelism)?);
        }
        let backends = BTreeMap::from([
            ("generator".to_string(), generator.backend_id()),
            ("evaluator".to_string(), evaluator.backend_id()),
        ]);
        self.finish_augment(&records, self.stage_config(Stage::Augment), backends)?;
        Ok(records)
    }

    /// Uses generation records produced elsewhere (for example by another
    /// question generator) in place of running the augment stage.
    pub fn import_generations(&self, path: &Path) -> Result<Vec<GenerationRecord>> {
        let corpus = self.load_ingested_corpus()?;
        let mut records: Vec<GenerationRecord> = jsonl::read(path)?.into_iter().map(|(_, r)| r).collect();
        for r in &mut records {
            if !corpus.contains(&r.doc_id) {
                warn!(doc_id = %r.doc_id, "imported record for a document outside the corpus");
            }
            r.fill_missing_texts(self.config.language)?;
        }
        let digest = sha256_file(path)?;
        let stage_config = json!({"import": digest, "language": self.config.language});
        self.finish_augment(&records, stage_config, BTreeMap::new())?;
        Ok(records)
    }

    fn finish_augment(
        &self,
        records: &[GenerationRecord],
        stage_config: Value,
        backends: BTreeMap<String, String>,
    ) -> Result<()> {
        jsonl::write(&self.path(GENERATIONS_FILE), records)?;
        let upstream = self.upstream_hash("ingest")?;
        self.write_manifest(
            "augment",
            Some(upstream),
            stage_config,
            backends,
            self.hash_files(&[CORPUS_FILE])?,
            self.hash_files(&[GENERATIONS_FILE])?,
        )?;
        Ok(())
    }

    fn load_generations(&self) -> Result<Vec<GenerationRecord>> {
        let mut records: Vec<GenerationRecord> = jsonl::read(&self.require(GENERATIONS_FILE, "augment")?)?
            .into_iter()
            .map(|(_, r)| r)
            .collect();
        for r in &mut records {
            r.fill_missing_texts(self.config.language)?;
        }
        Ok(records)
    }

    pub fn embed(&self) -> Result<()> {
        let corpus = self.load_ingested_corpus()?;
        let queries = load_queries(&self.require(QUERIES_FILE, "ingest")?)?;
        let records = self.load_generations()?;
        let provider = self.config.embedder.provider(&self.config.retry)?;

        let mut texts: Vec<String> = Vec::new();
        // Each text's owner, and for generated texts its kind, strategy and unit index.
        let mut slots: Vec<(String, Option<GeneratedSlot>)> = Vec::new();
        for d in corpus.iter() {
            texts.push(d.text.clone());
            slots.push((d.doc_id.clone(), None));
        }
        for r in records.iter().filter(|r| r.is_ok()) {
            if !corpus.contains(&r.doc_id) {
                warn!(doc_id = %r.doc_id, "skipping generations for a document outside the corpus");
                continue;
            }
            let kind = match r.task {
                Task::Qag => VectorKind::Qa,
                Task::Ee => VectorKind::Event,
            };
            let units: Vec<String> = r
                .units
                .iter()
                .map(|u| u.text.clone())
                .filter(|t| !t.trim().is_empty())
                .collect();
            for &strategy in &self.config.strategies {
                for (i, t) in organize(&units, strategy).into_iter().enumerate() {
                    texts.push(t);
                    slots.push((r.doc_id.clone(), Some((kind, strategy, i as u32))));
                }
            }
        }
        let embeddings = embed_texts(&texts, provider.as_ref())?;
        let entries: Vec<VectorEntry> = slots
            .into_iter()
            .zip(embeddings)
            .map(|((doc, slot), emb)| match slot {
                None => VectorEntry::original(doc, emb),
                Some((kind, strategy, i)) => VectorEntry::generated(doc, kind, strategy, i, emb),
            })
            .collect();
        jsonl::write(&self.path(VECTORS_FILE), &entries)?;

        let qtexts: Vec<String> = queries.iter().map(|q| q.text.clone()).collect();
        let qemb = embed_texts(&qtexts, provider.as_ref())?;
        let embedded: Vec<EmbeddedQuery> = queries
            .iter()
            .zip(qemb)
            .map(|(q, e)| EmbeddedQuery {
                query_id: q.query_id.clone(),
                embedding: e,
            })
            .collect();
        jsonl::write(&self.path(QUERY_VECTORS_FILE), &embedded)?;

        let upstream = self.upstream_hash("augment")?;
        self.write_manifest(
            "embed",
            Some(upstream),
            self.stage_config(Stage::Embed),
            BTreeMap::from([("embedder".to_string(), provider.provider_id())]),
            self.hash_files(&[CORPUS_FILE, QUERIES_FILE, GENERATIONS_FILE])?,
            self.hash_files(&[VECTORS_FILE, QUERY_VECTORS_FILE])?,
        )?;
        info!(vectors = entries.len(), queries = embedded.len(), "embedded");
        Ok(())
    }

    pub fn index(&self) -> Result<VectorStore> {
        let entries: Vec<VectorEntry> = jsonl::read(&self.require(VECTORS_FILE, "embed")?)?
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        let dim = match entries.first() {
            Some(e) => e.embedding.dim(),
            None => self.config.embedder.provider(&self.config.retry)?.dim(),
        };
        let mut store = VectorStore::new(dim);
        for e in entries {
            store.insert(e)?;
        }
        store.persist(&self.path(INDEX_DIR))?;
        let upstream = self.upstream_hash("embed")?;
        let index_vec = format!("{INDEX_DIR}/{INDEX_FILE}");
        let index_meta = format!("{INDEX_DIR}/{META_FILE}");
        self.write_manifest(
            "index",
            Some(upstream),
            self.stage_config(Stage::Index),
            BTreeMap::new(),
            self.hash_files(&[VECTORS_FILE])?,
            self.hash_files(&[&index_vec, &index_meta])?,
        )?;
        info!(vectors = store.len(), dim, "indexed");
        Ok(store)
    }

    fn load_search_inputs(&self) -> Result<(String, VectorStore, Vec<EmbeddedQuery>)> {
        let hash = self.check_index_config()?;
        let store = VectorStore::load(&self.path(INDEX_DIR))?;
        let queries: Vec<EmbeddedQuery> = jsonl::read(&self.require(QUERY_VECTORS_FILE, "embed")?)?
            .into_iter()
            .map(|(_, q)| q)
            .collect();
        Ok((hash, store, queries))
    }

    fn leaf_manifest(&self, stage: Stage, upstream: String, outputs: &[&str]) -> Result<()> {
        let index_vec = format!("{INDEX_DIR}/{INDEX_FILE}");
        let mut inputs = vec![index_vec.as_str(), QUERY_VECTORS_FILE];
        if stage != Stage::Retrieve {
            inputs.push(QRELS_FILE);
        }
        self.write_manifest(
            stage.name(),
            Some(upstream),
            self.stage_config(stage),
            BTreeMap::new(),
            self.hash_files(&inputs)?,
            self.hash_files(outputs)?,
        )?;
        Ok(())
    }

    /// Top documents per query for the configured scenario.
    pub fn retrieve(&self) -> Result<Vec<RunLine>> {
        let (hash, store, queries) = self.load_search_inputs()?;
        let scenario = self.config.scenario();
        let selected = scenario.select(&store);
        let k = *scenario.k_values.iter().max().expect("validated");
        let lines: Vec<RunLine> = queries
            .iter()
            .map(|q| {
                let ranked = rank_documents(&selected, &q.embedding, k)?;
                Ok(RunLine {
                    query_id: q.query_id.clone(),
                    results: ranked
                        .into_iter()
                        .enumerate()
                        .map(|(i, (doc_id, score))| RunHit {
                            doc_id,
                            score,
                            rank: i + 1,
                        })
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        jsonl::write(&self.path(RUN_FILE), &lines)?;
        self.leaf_manifest(Stage::Retrieve, hash, &[RUN_FILE])?;
        Ok(lines)
    }

    pub fn eval(&self) -> Result<EvalReport> {
        let (hash, store, queries) = self.load_search_inputs()?;
        let qrels = load_qrels(&self.require(QRELS_FILE, "ingest")?)?;
        let report = run_scenario(&self.config.scenario(), &store, &queries, &qrels)?;
        report.write_json(&self.path(REPORT_FILE))?;
        report.write_per_query_csv(&self.path(PER_QUERY_FILE))?;
        self.leaf_manifest(Stage::Eval, hash, &[REPORT_FILE, PER_QUERY_FILE])?;
        Ok(report)
    }

    /// The seven component subsets under the configured strategy.
    pub fn ablate(&self) -> Result<Vec<EvalReport>> {
        let (hash, store, queries) = self.load_search_inputs()?;
        let qrels = load_qrels(&self.require(QRELS_FILE, "ingest")?)?;
        let c = &self.config;
        let reports = run_ablation(&store, &queries, &qrels, c.strategy, &c.k_values, c.gain)?;
        let json_path = self.path(ABLATION_JSON);
        std::fs::write(&json_path, serde_json::to_string_pretty(&reports)? + "\n").map_err(|e| Error::io(&json_path, e))?;
        write_ablation_csv(&reports, &self.path(ABLATION_CSV))?;
        self.leaf_manifest(Stage::Ablate, hash, &[ABLATION_JSON, ABLATION_CSV])?;
        Ok(reports)
    }

    /// ingest, augment, embed, index, eval.
    pub fn run_all(&self) -> Result<EvalReport> {
        self.ingest()?;
        self.augment()?;
        self.embed()?;
        self.index()?;
        self.eval()
    }

    fn analysis_manifest(&self, name: &str, inputs: &[&str], output: &str, backends: BTreeMap<String, String>) -> Result<()> {
        let upstream = self.upstream_hash("augment").ok();
        self.write_manifest(
            name,
            upstream,
            self.stage_config(Stage::Augment),
            backends,
            self.hash_files(inputs)?,
            self.hash_files(&[output])?,
        )?;
        Ok(())
    }

    pub fn analyze_counts(&self) -> Result<UnitCountStats> {
        let records = self.load_generations()?;
        let stats = analysis::unit_count_stats(&records);
        let path = self.path(COUNTS_CSV);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        let fmt = |m: Option<f64>| m.map_or(String::new(), |v| format!("{v:.4}"));
        w.write_record(["qa_documents", "avg_qa_per_doc", "event_documents", "avg_events_per_doc", "failed"])
            .map_err(csv_err(&path))?;
        w.write_record([
            stats.qa_documents.to_string(),
            fmt(stats.mean_qa_per_doc),
            stats.event_documents.to_string(),
            fmt(stats.mean_events_per_doc),
            stats.failed.to_string(),
        ])
        .map_err(csv_err(&path))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.analysis_manifest("analyze-counts", &[GENERATIONS_FILE], COUNTS_CSV, BTreeMap::new())?;
        Ok(stats)
    }

    /// Diversity of the QA texts and of the event texts, each as one set.
    pub fn analyze_diversity(&self) -> Result<Vec<(VectorKind, usize, DiversityScores)>> {
        let records = self.load_generations()?;
        let provider = self.config.embedder.provider(&self.config.retry)?;
        let mut rows = Vec::new();
        for (task, kind) in [(Task::Qag, VectorKind::Qa), (Task::Ee, VectorKind::Event)] {
            let texts: Vec<String> = records
                .iter()
                .filter(|r| r.task == task && r.is_ok())
                .flat_map(|r| r.units.iter().map(|u| u.text.clone()))
                .filter(|t| !t.trim().is_empty())
                .collect();
            if texts.len() < 2 {
                warn!(kind = %kind, texts = texts.len(), "too few texts for diversity scores");
                continue;
            }
            rows.push((kind, texts.len(), analysis::diversity_scores(&texts, provider.as_ref())?));
        }
        let path = self.path(DIVERSITY_CSV);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["kind", "texts", "compression_ratio", "self_bleu", "self_embed_score", "self_repetition"])
            .map_err(csv_err(&path))?;
        for (kind, n, s) in &rows {
            w.write_record([
                kind.to_string(),
                n.to_string(),
                format!("{:.4}", s.compression_ratio),
                format!("{:.4}", s.self_bleu),
                format!("{:.4}", s.self_embed_score),
                format!("{:.4}", s.self_repetition),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.analysis_manifest(
            "analyze-diversity",
            &[GENERATIONS_FILE],
            DIVERSITY_CSV,
            BTreeMap::from([("embedder".to_string(), provider.provider_id())]),
        )?;
        Ok(rows)
    }

    /// Augments noise-injected copies of the corpus and measures how much of
    /// the noise survives into the generated texts.
    pub fn analyze_noise(&self, levels: &[f64]) -> Result<Vec<NoiseRow>> {
        let corpus = self.load_ingested_corpus()?;
        let c = &self.config;
        let generator = c.generator.gateway(c.seed, &c.retry, c.parallelism)?;
        let evaluator = c.evaluator.gateway(c.seed, &c.retry, c.parallelism)?;
        let options = c.augment_options();
        let mut rows = Vec::new();
        for &p in levels {
            let mut docs = Vec::with_capacity(corpus.len());
            let mut tokens: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for (i, d) in corpus.iter().enumerate() {
                let noisy = analysis::inject_noise(
                    &d.text,
                    &NoiseSpec {
                        percentage: p,
                        seed: c.seed.wrapping_add(i as u64),
                    },
                )?;
                tokens.insert(d.doc_id.clone(), noisy.noise_tokens);
                docs.push(Document {
                    doc_id: d.doc_id.clone(),
                    text: noisy.text,
                    metadata: d.metadata.clone(),
                });
            }
            let noisy_corpus = Corpus::from_documents(docs)?;
            for &task in &c.tasks {
                let records = augment_corpus(&noisy_corpus, task, &options, &generator, &evaluator, c.parallelism)?;
                let (mut total, mut kept) = (0usize, 0usize);
                for r in &records {
                    let doc_tokens = &tokens[&r.doc_id];
                    let texts: Vec<String> = r.units.iter().map(|u| u.text.clone()).collect();
                    total += doc_tokens.len();
                    kept += analysis::retained_count(&texts, doc_tokens);
                }
                rows.push(NoiseRow {
                    percentage: p,
                    task,
                    documents: records.len(),
                    noise_tokens: total,
                    retained_tokens: kept,
                    retained_fraction: if total == 0 { 0.0 } else { kept as f64 / total as f64 },
                });
            }
        }
        let path = self.path(NOISE_CSV);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["noise_percentage", "task", "documents", "noise_tokens", "retained_tokens", "retained_fraction"])
            .map_err(csv_err(&path))?;
        for r in &rows {
            w.write_record([
                format!("{:.0}", r.percentage * 100.0),
                r.task.to_string(),
                r.documents.to_string(),
                r.noise_tokens.to_string(),
                r.retained_tokens.to_string(),
                format!("{:.4}", r.retained_fraction),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.analysis_manifest(
            "analyze-noise",
            &[CORPUS_FILE],
            NOISE_CSV,
            BTreeMap::from([
                ("generator".to_string(), generator.backend_id()),
                ("evaluator".to_string(), evaluator.backend_id()),
            ]),
        )?;
        Ok(rows)
    }
}
