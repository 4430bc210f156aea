//! Diversity of a set of generated texts. Higher scores mean less diverse.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, embed_texts, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::text::whitespace_tokens;

pub const MAX_BLEU_ORDER: usize = 4;
pub const REPETITION_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityScores {
    pub compression_ratio: f64,
    pub self_bleu: f64,
    pub self_embed_score: f64,
    pub self_repetition: f64,
}

fn need(texts: &[String], min: usize, what: &str) -> Result<()> {
    if texts.len() < min {
        return Err(Error::InvalidArgument(format!("{what} needs at least {min} texts, got {}", texts.len())));
    }
    Ok(())
}

/// Largest and second-largest count of an n-gram across texts, and which
/// text holds the largest. Lets each candidate find its best reference
/// count without rescanning the others.
#[derive(Default, Clone, Copy)]
struct Top2 {
    best: u32,
    best_idx: usize,
    second: u32,
}

impl Top2 {
    fn push(&mut self, idx: usize, count: u32) {
        if count > self.best {
            self.second = self.best;
            self.best = count;
            self.best_idx = idx;
        } else if count > self.second {
            self.second = count;
        }
    }

    fn excluding(&self, idx: usize) -> u32 {
        if self.best_idx == idx {
            self.second
        } else {
            self.best
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u32> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Mean BLEU of each text against all the others as references.
///
/// Up to 4-grams with uniform weights, clipped counts, no smoothing, and a
/// brevity penalty against the closest reference length (the shorter on a
/// tie). Tokens are lowercased whitespace words, CJK split per character.
pub fn self_bleu(texts: &[String]) -> Result<f64> {
    need(texts, 2, "self-BLEU")?;
    let tokens: Vec<Vec<String>> = texts.iter().map(|t| whitespace_tokens(t)).collect();

    let per_order: Vec<Vec<HashMap<&[String], u32>>> = (1..=MAX_BLEU_ORDER)
        .map(|n| tokens.iter().map(|t| ngram_counts(t, n)).collect())
        .collect();
    let tops: Vec<HashMap<&[String], Top2>> = per_order
        .iter()
        .map(|counts| {
            let mut top: HashMap<&[String], Top2> = HashMap::new();
            for (i, c) in counts.iter().enumerate() {
                for (g, &n) in c {
                    top.entry(*g).or_default().push(i, n);
                }
            }
            top
        })
        .collect();

    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &tokens {
        *lengths.entry(t.len()).or_insert(0) += 1;
    }

    let scores: Vec<f64> = (0..texts.len())
        .into_par_iter()
        .map(|i| {
            let c = tokens[i].len();
            if c == 0 {
                return 0.0;
            }
            let mut log_sum = 0.0;
            for (counts, top) in per_order.iter().zip(&tops) {
                let total: u32 = counts[i].values().sum();
                let clipped: u32 = counts[i].iter().map(|(g, &n)| n.min(top[g].excluding(i))).sum();
                if clipped == 0 || total == 0 {
                    return 0.0;
                }
                log_sum += (f64::from(clipped) / f64::from(total)).ln() / MAX_BLEU_ORDER as f64;
            }
            let r = closest_other_length(&lengths, c);
            let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
            bp * log_sum.exp()
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Reference length closest to `c`, excluding one text of length `c` itself.
fn closest_other_length(lengths: &BTreeMap<usize, usize>, c: usize) -> usize {
    let own_shared = lengths.get(&c).copied().unwrap_or(0) > 1;
    if own_shared {
        return c;
    }
    let below = lengths.range(..c).next_back().map(|(&l, _)| l);
    let above = lengths.range(c + 1..).next().map(|(&l, _)| l);
    match (below, above) {
        (Some(b), Some(a)) => {
            if c - b <= a - c {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => c,
    }
}

/// Bytes of the space-joined texts over bytes after raw DEFLATE.
pub fn compression_ratio(texts: &[String]) -> Result<f64> {
    need(texts, 1, "compression ratio")?;
    let joined = texts.join(" ");
    if joined.is_empty() {
        return Err(Error::InvalidArgument("compression ratio of empty text".into()));
    }
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(joined.as_bytes())
        .and_then(|_| enc.finish())
        .map(|compressed| joined.len() as f64 / compressed.len() as f64)
        .map_err(|e| Error::InvalidArgument(format!("deflate failed: {e}")))
}

/// Share of distinct 4-grams (over all texts) that occur in more than one
/// text. Zero when no text has four tokens.
pub fn self_repetition(texts: &[String]) -> Result<f64> {
    need(texts, 2, "self-repetition")?;
    let mut seen_in: HashMap<Vec<String>, usize> = HashMap::new();
    for t in texts {
        let tokens = whitespace_tokens(t);
        let unique: HashSet<&[String]> = tokens.windows(REPETITION_ORDER).collect();
        for g in unique {
            *seen_in.entry(g.to_vec()).or_insert(0) += 1;
        }
    }
    if seen_in.is_empty() {
        return Ok(0.0);
    }
    let shared = seen_in.values().filter(|&&n| n > 1).count();
    Ok(shared as f64 / seen_in.len() as f64)
}

/// Mean pairwise cosine of the texts' embeddings.
pub fn self_embed_score(texts: &[String], provider: &dyn EmbeddingProvider) -> Result<f64> {
    need(texts, 2, "self-embedding score")?;
    let emb = embed_texts(texts, provider)?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..emb.len() {
        for j in i + 1..emb.len() {
            sum += cosine(&emb[i], &emb[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

pub fn diversity_scores(texts: &[String], provider: &dyn EmbeddingProvider) -> Result<DiversityScores> {
    Ok(DiversityScores {
        compression_ratio: compression_ratio(texts)?,
        self_bleu: self_bleu(texts)?,
        self_embed_score: self_embed_score(texts, provider)?,
        self_repetition: self_repetition(texts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;

    fn v(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bleu_extremes() {
        let same = v(&["the cat sat on the mat", "the cat sat on the mat"]);
        assert!((self_bleu(&same).unwrap() - 1.0).abs() < 1e-12);
        let disjoint = v(&["alpha beta gamma delta", "one two three four"]);
        assert_eq!(self_bleu(&disjoint).unwrap(), 0.0);
        assert!(self_bleu(&v(&["only one"])).is_err());
    }

    #[test]
    fn bleu_is_case_insensitive_and_permutation_invariant() {
        let a = v(&["The cat sat on the mat today", "the cat sat on a mat", "a dog sat on the mat"]);
        let mut b = a.clone();
        b.reverse();
        let x = self_bleu(&a).unwrap();
        assert!((x - self_bleu(&b).unwrap()).abs() < 1e-12);
        assert!(x > 0.0 && x < 1.0);
    }

    #[test]
    fn closest_length_prefers_shorter_on_tie() {
        let lens: BTreeMap<usize, usize> = [(4, 1), (6, 1), (8, 1)].into_iter().collect();
        assert_eq!(closest_other_length(&lens, 6), 4);
        let dup: BTreeMap<usize, usize> = [(6, 2)].into_iter().collect();
        assert_eq!(closest_other_length(&dup, 6), 6);
    }

    #[test]
    fn compression() {
        assert!(compression_ratio(&v(&[&"ab".repeat(1000)])).unwrap() > 5.0);
        assert!(compression_ratio(&v(&["xq7 Zp2 kk9"])).unwrap() > 0.5);
        assert!(compression_ratio(&[]).is_err());
    }

    #[test]
    fn repetition() {
        let same = v(&["one two three four five", "one two three four five"]);
        assert_eq!(self_repetition(&same).unwrap(), 1.0);
        let half = v(&["a b c d", "a b c d e f g h i"]);
        // distinct 4-grams: abcd, bcde, cdef, defg, efgh, fghi; only abcd shared
        assert!((self_repetition(&half).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(self_repetition(&v(&["a b", "c d"])).unwrap(), 0.0);
    }

    #[test]
    fn embed_score_is_low_for_disjoint_vocabularies() {
        let e = HashEmbedder::new(1024, 0);
        let texts = v(&[
            "volcanic basalt erupts from ridges",
            "symphony orchestra tunes violins",
            "quarterly revenue exceeded forecasts",
        ]);
        assert!(self_embed_score(&texts, &e).unwrap() < 0.2);
        let same = v(&["a b c", "a b c"]);
        assert!((self_embed_score(&same, &e).unwrap() - 1.0).abs() < 1e-6);
    }
}
