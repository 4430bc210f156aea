//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. None of these call into the library's math.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use densaug::config::RunConfig;
use densaug::organize::Strategy;
use densaug::vdb::VectorStore;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("mini20")
}

/// Default configuration pointed at the 20-document fixture.
pub fn mini20_config(out: &Path, strategy: Strategy) -> RunConfig {
    let dir = fixture_dir();
    let mut cfg = RunConfig::default();
    cfg.paths.corpus = Some(dir.join("corpus.jsonl"));
    cfg.paths.queries = Some(dir.join("queries.jsonl"));
    cfg.paths.qrels = Some(dir.join("qrels.jsonl"));
    cfg.paths.output_dir = out.to_path_buf();
    cfg.strategy = strategy;
    cfg.parallelism = 2;
    cfg
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn exact_dot(a: &[f64], b: &[f64]) -> BigRational {
    a.iter()
        .zip(b)
        .fold(BigRational::zero(), |acc, (x, y)| acc + exact(*x) * exact(*y))
}

/// Normalized margin from exact rational arithmetic. The only rounding is
/// one conversion of `mu^2` to f64 and one square root.
pub fn exact_margin(q: &[f64], v1: &[f64], v2: &[f64]) -> f64 {
    let diff: Vec<BigRational> = v1.iter().zip(v2).map(|(a, b)| exact(*a) - exact(*b)).collect();
    let num = q
        .iter()
        .zip(&diff)
        .fold(BigRational::zero(), |acc, (x, d)| acc + exact(*x) * d);
    let qq = exact_dot(q, q);
    let dd = diff.iter().fold(BigRational::zero(), |acc, d| acc + d * d);
    let squared = (&num * &num) / (qq * dd);
    let magnitude = squared.to_f64().expect("representable").sqrt();
    if num.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

/// `2^rel - 1` gains, `log2(rank + 1)` discounts, ideal from all positive grades.
pub fn brute_ndcg(ranked: &[String], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    let gain = |g: u32| (BigInt::from(1) << g as usize).to_f64().unwrap() - 1.0;
    let mut dcg = 0.0;
    for rank in 1..=k.min(ranked.len()) {
        let g = grades.get(&ranked[rank - 1]).copied().unwrap_or(0);
        dcg += gain(g) / ((rank + 1) as f64).log2();
    }
    let mut ideal: Vec<u32> = grades.values().copied().filter(|g| *g > 0).collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, g) in ideal.iter().take(k).enumerate() {
        idcg += gain(*g) / ((i + 2) as f64).log2();
    }
    dcg / idcg
}

/// Scores every entry, sorts all of them, keeps the first `k` ids.
pub fn full_sort_search(store: &VectorStore, query: &[f32], k: usize) -> Vec<String> {
    let q: Vec<f64> = query.iter().map(|&x| f64::from(x)).collect();
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, String)> = store
        .entries()
        .iter()
        .map(|e| {
            let v: Vec<f64> = e.embedding.values().iter().map(|&x| f64::from(x)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            let s = if n == 0.0 { 0.0 } else { dot / (qn * n) };
            (s, e.vector_id.clone())
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Three short texts and their self-BLEU worked out by hand.
///
/// "the cat sat on the mat" against the other two: every 1..4-gram
/// occurs in the third text, so BLEU = 1. "the cat sat on a mat": clipped
/// precisions 5/6, 3/5, 2/4, 1/3 and equal-length references, so
/// BLEU = (1/12)^(1/4). The seven-word text: 6/7, 5/6, 4/5, 3/4 and it is
/// longer than both references, so BLEU = (3/7)^(1/4).
pub fn bleu_fixture() -> (Vec<String>, f64) {
    let texts = ["the cat sat on the mat", "the cat sat on a mat", "the cat sat on the mat today"]
        .map(String::from)
        .to_vec();
    let expected = (1.0 + (1.0f64 / 12.0).powf(0.25) + (3.0f64 / 7.0).powf(0.25)) / 3.0;
    (texts, expected)
}

/// Every file under `dir`, as relative path to contents.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn is_subsequence(needle: &str, hay: &str) -> bool {
    let mut it = hay.chars();
    needle.chars().all(|c| it.by_ref().any(|h| h == c))
}
