//! Sentence splitting and token-budget chunking ahead of machine translation.

mod chunk;
mod sentences;
mod translate;

pub use chunk::{chunk_by_tokens, chunk_sentences, Chunk};
pub use sentences::split_sentences;
pub use translate::{
    translate_chunks, IdentityTranslator, SubprocessTranslator, TranslationFailure, TranslationOutcome, Translator,
    TranslatorSpec,
};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

/// One line of the chunk JSONL output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub token_count: usize,
    pub oversized: bool,
}

impl From<&Chunk> for ChunkRecord {
    fn from(c: &Chunk) -> Self {
        ChunkRecord {
            doc_id: c.doc_id.clone(),
            index: c.index,
            text: c.text(),
            token_count: c.token_count,
            oversized: c.oversized,
        }
    }
}

/// Splits and chunks one document with whitespace-token counting.
pub fn chunk_document(doc: &Document, budget: usize) -> Vec<Chunk> {
    chunk_by_tokens(&doc.id, &split_sentences(&doc.text), budget)
}
