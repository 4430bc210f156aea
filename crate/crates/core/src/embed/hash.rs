use std::hash::Hasher;

use super::{Embedding, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::text::lexical_tokens;

pub const DEFAULT_HASH_DIM: usize = 1024;

fn bucket(feature: &[&str], seed: u64, d: usize) -> (usize, f64) {
    let mut h = fnv::FnvHasher::default();
    h.write_u64(seed);
    for part in feature {
        h.write(part.as_bytes());
        h.write_u8(0xff);
    }
    let x = h.finish();
    // FNV's high bits mix poorly for short inputs; fold before splitting.
    let x = x ^ (x >> 29) ^ (x >> 47);
    let sign = if (x >> 63) & 1 == 1 { -1.0 } else { 1.0 };
    ((x % d as u64) as usize, sign)
}

/// Signed feature hashing of lowercased unigrams and bigrams, L2-normalized.
pub fn hash_embed(text: &str, d: usize, seed: u64) -> Result<Embedding> {
    if d == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let tokens = lexical_tokens(text);
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(format!("no tokens in text {text:?}")));
    }
    let mut acc = vec![0.0f64; d];
    for t in &tokens {
        let (i, s) = bucket(&[t], seed, d);
        acc[i] += s;
    }
    for w in tokens.windows(2) {
        let (i, s) = bucket(&[&w[0], &w[1]], seed, d);
        acc[i] += s;
    }
    Ok(Embedding::normalized(&acc))
}

/// Offline embedder backed by [`hash_embed`].
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn provider_id(&self) -> String {
        format!("hash:d{}:s{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| hash_embed(t, self.dim, self.seed)).collect()
    }
}
