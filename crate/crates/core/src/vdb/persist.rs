//! On-disk layout: `index.vec` holds a 20-byte header (magic `DVEC`, version,
//! dimension, count) followed by little-endian `f32` rows; `index.meta.jsonl`
//! holds one provenance line per row, in the same order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{VectorEntry, VectorKind, VectorStore};
use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::organize::Strategy;

pub const INDEX_FILE: &str = "index.vec";
pub const META_FILE: &str = "index.meta.jsonl";

const MAGIC: &[u8; 4] = b"DVEC";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 20;

#[derive(Serialize, Deserialize)]
struct MetaLine {
    vector_id: String,
    doc_id: String,
    kind: VectorKind,
    strategy: Option<Strategy>,
    unit_index: Option<u32>,
}

impl VectorStore {
    /// Writes `index.vec` and `index.meta.jsonl` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vec_path = dir.join(INDEX_FILE);
        let file = File::create(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&vec_path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes()).map_err(io)?;
        for e in &self.entries {
            for v in e.embedding.values() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;

        let meta: Vec<MetaLine> = self
            .entries
            .iter()
            .map(|e| MetaLine {
                vector_id: e.vector_id.clone(),
                doc_id: e.doc_id.clone(),
                kind: e.kind,
                strategy: e.strategy,
                unit_index: e.unit_index,
            })
            .collect();
        jsonl::write(&dir.join(META_FILE), &meta)
    }

    /// Reads a store written by [`VectorStore::persist`].
    pub fn load(dir: &Path) -> Result<VectorStore> {
        let vec_path = dir.join(INDEX_FILE);
        let meta_path = dir.join(META_FILE);
        if !vec_path.exists() {
            return Err(Error::MissingArtifact {
                path: vec_path,
                stage: "index",
            });
        }
        let corrupt = |offset: u64, message: String| Error::CorruptIndex {
            path: vec_path.clone(),
            offset,
            message,
        };
        let file = File::open(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&vec_path, e))?.len();
        let mut r = BufReader::new(file);

        let mut header = [0u8; HEADER_LEN as usize];
        if file_len < HEADER_LEN {
            return Err(corrupt(file_len, format!("file ends inside the {HEADER_LEN}-byte header")));
        }
        r.read_exact(&mut header).map_err(|e| Error::io(&vec_path, e))?;
        if &header[0..4] != MAGIC {
            return Err(corrupt(0, "bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(corrupt(4, format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
        let count = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
        let row_bytes = dim as u64 * 4;
        let expected = count
            .checked_mul(row_bytes)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| corrupt(12, format!("count {count} overflows")))?;
        if file_len < expected {
            let full_rows = (file_len - HEADER_LEN) / row_bytes.max(1);
            return Err(corrupt(
                HEADER_LEN + full_rows * row_bytes,
                format!("truncated: header promises {count} rows, file holds {full_rows}"),
            ));
        }
        if file_len > expected {
            return Err(corrupt(expected, format!("{} trailing bytes", file_len - expected)));
        }

        let meta: Vec<MetaLine> = if meta_path.exists() {
            jsonl::read(&meta_path)?.into_iter().map(|(_, m)| m).collect()
        } else {
            return Err(Error::MissingArtifact {
                path: meta_path,
                stage: "index",
            });
        };
        if meta.len() as u64 != count {
            return Err(Error::Validation(format!(
                "{} has {} lines but {} holds {count} vectors",
                meta_path.display(),
                meta.len(),
                vec_path.display()
            )));
        }

        let mut store = VectorStore::new(dim);
        let mut row = vec![0u8; row_bytes as usize];
        for m in meta {
            r.read_exact(&mut row).map_err(|e| Error::io(&vec_path, e))?;
            let values: Vec<f32> = row
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            store.insert(VectorEntry {
                vector_id: m.vector_id,
                embedding: Embedding::new(values),
                doc_id: m.doc_id,
                kind: m.kind,
                strategy: m.strategy,
                unit_index: m.unit_index,
            })?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VectorStore {
        let mut s = VectorStore::new(3);
        s.insert(VectorEntry::original("d1", Embedding::new(vec![0.1, -0.2, 0.3]))).unwrap();
        s.insert(VectorEntry::generated(
            "d1",
            VectorKind::Event,
            Strategy::Tmo,
            0,
            Embedding::new(vec![f32::MIN_POSITIVE, 1.0, -0.0]),
        ))
        .unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = small();
        s.persist(dir.path()).unwrap();
        let back = VectorStore::load(dir.path()).unwrap();
        assert_eq!(back, s);
        for (a, b) in s.entries().iter().zip(back.entries()) {
            let bits = |e: &VectorEntry| e.embedding.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        let len = std::fs::metadata(dir.path().join(INDEX_FILE)).unwrap().len();
        assert_eq!(len, 20 + 2 * 3 * 4);
    }

    #[test]
    fn truncation_reports_an_offset() {
        let dir = tempfile::tempdir().unwrap();
        small().persist(dir.path()).unwrap();
        let path = dir.path().join(INDEX_FILE);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match VectorStore::load(dir.path()) {
            Err(Error::CorruptIndex { offset, .. }) => assert_eq!(offset, 20 + 12),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, &bytes[..7]).unwrap();
        assert!(matches!(VectorStore::load(dir.path()), Err(Error::CorruptIndex { offset: 7, .. })));
        std::fs::write(&path, b"XXXX0000000000000000").unwrap();
        assert!(matches!(VectorStore::load(dir.path()), Err(Error::CorruptIndex { offset: 0, .. })));
    }

    #[test]
    fn missing_files_name_the_index_stage() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            VectorStore::load(dir.path()),
            Err(Error::MissingArtifact { stage: "index", .. })
        ));
    }
}
