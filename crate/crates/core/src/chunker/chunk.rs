use serde::{Deserialize, Serialize};

use crate::tokenize::token_count;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub sentences: Vec<String>,
    pub token_count: usize,
    /// A single sentence longer than the budget.
    pub oversized: bool,
}

impl Chunk {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// Greedy in-order packing: a sentence joins the current chunk while the
/// running count stays within `budget`. A sentence over budget on its own
/// becomes a single oversized chunk.
pub fn chunk_sentences(
    doc_id: &str,
    sentences: &[String],
    budget: usize,
    counter: impl Fn(&str) -> usize,
) -> Vec<Chunk> {
    assert!(budget >= 1, "chunk budget must be positive");
    let mut chunks = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut used = 0usize;

    let flush = |current: &mut Vec<String>, used: &mut usize, oversized: bool, chunks: &mut Vec<Chunk>| {
        if current.is_empty() {
            return;
        }
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            index: chunks.len(),
            sentences: std::mem::take(current),
            token_count: *used,
            oversized,
        });
        *used = 0;
    };

    for s in sentences {
        let n = counter(s);
        if n > budget {
            flush(&mut current, &mut used, false, &mut chunks);
            current.push(s.clone());
            used = n;
            flush(&mut current, &mut used, true, &mut chunks);
            continue;
        }
        if used + n > budget {
            flush(&mut current, &mut used, false, &mut chunks);
        }
        current.push(s.clone());
        used += n;
    }
    flush(&mut current, &mut used, false, &mut chunks);
    chunks
}

/// `chunk_sentences` with whitespace-token counting.
pub fn chunk_by_tokens(doc_id: &str, sentences: &[String], budget: usize) -> Vec<Chunk> {
    chunk_sentences(doc_id, sentences, budget, token_count)
}
