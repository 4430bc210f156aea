//! Dense text vectors from a pluggable provider.

mod hash;
mod remote;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hash::{hash_embed, HashEmbedder, DEFAULT_HASH_DIM};
pub use remote::RemoteEmbedder;

/// A stored vector with its cached Euclidean norm.
///
/// Values are kept in `f32` to match the on-disk index format; norms and
/// products are computed in `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding {
    values: Vec<f32>,
    norm: f64,
}

impl From<Vec<f32>> for Embedding {
    fn from(values: Vec<f32>) -> Self {
        Self::new(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        Self { values, norm }
    }

    /// Scales `values` to unit length. A zero vector stays zero.
    pub fn normalized(values: &[f64]) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Self::new(values.iter().map(|&v| v as f32).collect());
        }
        Self::new(values.iter().map(|&v| (v / norm) as f32).collect())
    }

    pub fn normalize(self) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f64::from(v)).collect();
        Self::normalized(&values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }
}

/// `<u, v> / (|u| |v|)`.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::InvalidArgument(format!("dimension mismatch: {} vs {}", u.dim(), v.dim())));
    }
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(Error::InvalidArgument("cosine of a zero-norm vector".into()));
    }
    Ok(u.dot(v) / (u.norm() * v.norm()))
}

/// Something that turns a batch of texts into vectors of a fixed dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> String;
    fn dim(&self) -> usize;
    /// Preferred number of texts per call.
    fn batch_size(&self) -> usize {
        64
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>>;
}

/// One unit-norm vector per text, in input order. Batches run on the
/// current rayon pool.
pub fn embed_texts(texts: &[String], provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>> {
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::InvalidArgument(format!("text #{i} is empty")));
    }
    let batch = provider.batch_size().max(1);
    let dim = provider.dim();
    let batches: Vec<Vec<Embedding>> = texts
        .par_chunks(batch)
        .enumerate()
        .map(|(b, chunk)| {
            let out = provider.embed_batch(chunk).map_err(|e| match e {
                Error::Transport(m) => Error::Transport(format!("embedding batch {b}: {m}")),
                Error::Backend { status, body } => Error::Backend {
                    status,
                    body: format!("embedding batch {b}: {body}"),
                },
                other => other,
            })?;
            if out.len() != chunk.len() {
                return Err(Error::Validation(format!(
                    "embedding batch {b}: provider returned {} vectors for {} texts",
                    out.len(),
                    chunk.len()
                )));
            }
            out.into_iter()
                .map(|e| {
                    if e.dim() != dim {
                        return Err(Error::Validation(format!(
                            "embedding batch {b}: vector of dimension {} from a provider configured for {dim}",
                            e.dim()
                        )));
                    }
                    Ok(e.normalize())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(batches.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        let v = Embedding::new(vec![0.3, -1.2, 2.5]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let e1 = Embedding::new(vec![1.0, 0.0]);
        let e2 = Embedding::new(vec![0.0, 1.0]);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        assert!(cosine(&e1, &Embedding::new(vec![0.0, 0.0])).is_err());
        assert!(cosine(&e1, &v).is_err());
    }

    #[test]
    fn normalized_has_unit_norm() {
        let e = Embedding::normalized(&[3.0, 4.0, 12.0]);
        assert!((e.norm() - 1.0).abs() < 1e-6);
        assert_eq!(Embedding::normalized(&[0.0, 0.0]).norm(), 0.0);
    }

    #[test]
    fn serde_is_a_plain_array() {
        let e = Embedding::new(vec![0.5, -0.25]);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "[0.5,-0.25]");
        assert_eq!(serde_json::from_str::<Embedding>(&s).unwrap(), e);
    }

    #[test]
    fn embed_texts_rejects_empty_and_keeps_order() {
        let p = HashEmbedder::new(64, 1);
        assert!(embed_texts(&["ok".into(), "  ".into()], &p).is_err());
        let texts: Vec<String> = (0..150).map(|i| format!("text number {i}")).collect();
        let out = embed_texts(&texts, &p).unwrap();
        assert_eq!(out.len(), 150);
        for (t, e) in texts.iter().zip(&out) {
            assert_eq!(e, &hash_embed(t, 64, 1).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        struct Liar;
        impl EmbeddingProvider for Liar {
            fn provider_id(&self) -> String {
                "liar".into()
            }
            fn dim(&self) -> usize {
                8
            }
            fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
                Ok(texts.iter().map(|_| Embedding::new(vec![1.0; 4])).collect())
            }
        }
        assert!(matches!(embed_texts(&["a".into()], &Liar), Err(Error::Validation(_))));
    }
}
