//! Augmenting retrieval corpora with LLM-generated question-answer pairs and
//! events, then measuring what the extra vectors do to dense retrieval.
//!
//! The pipeline runs as independent stages over files on disk: load a
//! corpus ([`corpus`]), generate and score structured units ([`augment`],
//! [`llm`]), turn them back into text ([`organize`]), embed ([`embed`]),
//! index ([`vdb`]) and evaluate ([`eval`]). [`theory`] checks the
//! normalized-margin inequalities numerically and [`analysis`] holds the
//! diversity, noise and count statistics.

pub mod analysis;
pub mod augment;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod jsonl;
pub mod llm;
pub mod organize;
pub mod pipeline;
pub mod text;
pub mod theory;
pub mod vdb;

pub use error::{Error, Result};
