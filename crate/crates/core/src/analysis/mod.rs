//! Post-hoc analyses of generated text: diversity, noise retention and
//! per-document unit counts.

pub mod counts;
pub mod diversity;
pub mod noise;

pub use counts::{unit_count_stats, UnitCountStats};
pub use diversity::{compression_ratio, diversity_scores, self_bleu, self_embed_score, self_repetition, DiversityScores};
pub use noise::{inject_noise, noise_budget, retained_count, retained_noise, NoiseSpec, NoisyText};
