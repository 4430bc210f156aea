//! Tokenizers shared by the hashing embedder and the diversity metrics.

/// True for characters in the main CJK ideograph, kana and hangul blocks.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x3400..=0x4DBF    // CJK ext A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F) // ext B..F, compat supplement
}

/// Lowercased alphanumeric runs; every CJK character is its own token and
/// every other non-alphanumeric character separates tokens.
pub fn lexical_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Lowercased whitespace split, with CJK runs split per character.
/// Punctuation stays attached to its word.
pub fn whitespace_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_cjk(c) {
                flush(&mut current, &mut tokens);
                tokens.push(c.to_string());
            } else {
                current.extend(c.to_lowercase());
            }
        }
        flush(&mut current, &mut tokens);
    }
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
