//! Whitespace tokenization shared by every stage.
//!
//! A token is a maximal run of non-whitespace codepoints, where whitespace is
//! the Unicode `White_Space` property. All token budgets in the pipeline (dedup
//! match length, minimum words, chunk size) are counted in these tokens.

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses every whitespace run to a single space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, tok) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}
