//! Random-noise injection and retention measurement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALPHANUMERIC: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
const MIN_TOKEN: usize = 5;
const MAX_TOKEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Inserted characters as a fraction of the text's character count.
    pub percentage: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyText {
    pub text: String,
    pub noise_tokens: Vec<String>,
}

/// Number of characters `spec` adds to `text`.
pub fn noise_budget(text: &str, percentage: f64) -> usize {
    (percentage * text.chars().count() as f64).round() as usize
}

/// Token lengths whose pieces (token plus one space) add up to `budget`.
fn piece_lengths(rng: &mut ChaCha8Rng, budget: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rem = budget;
    while rem > 0 {
        let len = if rem <= MAX_TOKEN + 1 {
            rem - 1
        } else {
            // Leave at least one minimal piece for the remainder.
            let max = MAX_TOKEN.min(rem - 1 - (MIN_TOKEN + 1));
            rng.gen_range(MIN_TOKEN..=max)
        };
        out.push(len);
        rem -= len + 1;
    }
    out
}

/// Inserts random alphanumeric tokens at random word boundaries.
///
/// Exactly `round(percentage * chars)` characters are added, counting the
/// space that separates each token from the text. Tokens are 5 to 12
/// characters; only a budget under 6 yields a shorter one. The original
/// characters are kept in order.
pub fn inject_noise(text: &str, spec: &NoiseSpec) -> Result<NoisyText> {
    if !(spec.percentage >= 0.0 && spec.percentage.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise percentage {} must be a finite non-negative number", spec.percentage)));
    }
    let budget = noise_budget(text, spec.percentage);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lengths = piece_lengths(&mut rng, budget);

    // Byte offsets where a word starts, plus the end of the text.
    let mut slots: Vec<usize> = Vec::new();
    let mut prev_ws = true;
    for (i, c) in text.char_indices() {
        if !c.is_whitespace() && prev_ws {
            slots.push(i);
        }
        prev_ws = c.is_whitespace();
    }
    let end = text.len();
    slots.push(end);

    let mut inserts: Vec<(usize, usize, String)> = Vec::with_capacity(lengths.len());
    let mut noise_tokens = Vec::with_capacity(lengths.len());
    for (order, len) in lengths.into_iter().enumerate() {
        let token: String = (0..len)
            .map(|_| *ALPHANUMERIC.choose(&mut rng).expect("non-empty alphabet") as char)
            .collect();
        let slot = *slots.choose(&mut rng).expect("at least the end slot");
        let piece = if slot == end { format!(" {token}") } else { format!("{token} ") };
        if !token.is_empty() {
            noise_tokens.push(token);
        }
        inserts.push((slot, order, piece));
    }
    inserts.sort_by_key(|(slot, order, _)| (*slot, *order));

    let mut out = String::with_capacity(text.len() + budget);
    let mut cursor = 0;
    for (slot, _, piece) in &inserts {
        out.push_str(&text[cursor..*slot]);
        out.push_str(piece);
        cursor = *slot;
    }
    out.push_str(&text[cursor..]);
    Ok(NoisyText { text: out, noise_tokens })
}

/// Fraction of `noise_tokens` found verbatim in the generated texts. An
/// empty token list retains nothing.
pub fn retained_noise(generated_texts: &[String], noise_tokens: &[String]) -> f64 {
    if noise_tokens.is_empty() {
        return 0.0;
    }
    retained_count(generated_texts, noise_tokens) as f64 / noise_tokens.len() as f64
}

/// Number of `noise_tokens` found verbatim in the generated texts.
pub fn retained_count(generated_texts: &[String], noise_tokens: &[String]) -> usize {
    let haystack = generated_texts.join("\n");
    noise_tokens.iter().filter(|t| haystack.contains(t.as_str())).count()
}
