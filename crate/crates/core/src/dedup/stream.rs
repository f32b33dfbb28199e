use std::collections::{HashMap, HashSet};

use crate::corpus::CorpusShard;
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

/// Bidirectional token string <-> id map; ids are assigned in order of first
/// occurrence.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    words: Vec<String>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }
}

/// Location of one document inside the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocSpan {
    pub doc_index: usize,
    pub shard: usize,
    pub position: usize,
    pub id: String,
    pub start: usize,
    pub end: usize,
}

impl DocSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// All documents' token ids concatenated in order. Consecutive documents are
/// separated by a sentinel id that occurs exactly once, so no repeated
/// substring can cross a document boundary.
#[derive(Debug, Clone)]
pub struct TokenStream {
    tokens: Vec<u32>,
    docs: Vec<DocSpan>,
    vocab: Vocab,
    sentinel_base: u32,
}

const MAX_ID: u64 = 1 << 31;

impl TokenStream {
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn docs(&self) -> &[DocSpan] {
        &self.docs
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn sentinel_base(&self) -> u32 {
        self.sentinel_base
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// One past the largest id in the stream.
    pub fn alphabet_size(&self) -> usize {
        self.sentinel_base as usize + self.docs.len().saturating_sub(1)
    }

    pub fn is_separator(&self, pos: usize) -> bool {
        self.tokens[pos] >= self.sentinel_base
    }

    /// Index into `docs()` of the document covering `pos`, `None` for a
    /// separator.
    pub fn doc_at(&self, pos: usize) -> Option<usize> {
        let i = self.docs.partition_point(|d| d.start <= pos);
        let d = &self.docs[i.checked_sub(1)?];
        (pos < d.end).then_some(i - 1)
    }

    pub fn detokenize(&self, doc_index: usize) -> String {
        let d = &self.docs[doc_index];
        self.tokens[d.start..d.end]
            .iter()
            .map(|&t| self.vocab.word(t).expect("token id in vocab"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Concatenates every document of every shard, in order.
pub fn build_stream(shards: &[CorpusShard]) -> Result<TokenStream> {
    let mut vocab = Vocab::default();
    let mut tokens = Vec::new();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut pending_separators = 0usize;

    for (si, shard) in shards.iter().enumerate() {
        for (pi, doc) in shard.documents().iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Integrity(format!(
                    "document id `{}` appears twice in the dedup input",
                    doc.id
                )));
            }
            if !docs.is_empty() {
                // placeholder, rewritten once the vocabulary size is known
                tokens.push(u32::MAX);
                pending_separators += 1;
            }
            let start = tokens.len();
            for tok in tokenize(&doc.text) {
                tokens.push(vocab.intern(tok));
            }
            docs.push(DocSpan {
                doc_index: docs.len(),
                shard: si,
                position: pi,
                id: doc.id.clone(),
                start,
                end: tokens.len(),
            });
        }
    }

    if vocab.len() as u64 + pending_separators as u64 > MAX_ID {
        return Err(Error::Capacity(format!(
            "{} distinct tokens plus {} separators exceed 2^31 ids",
            vocab.len(),
            pending_separators
        )));
    }
    if tokens.len() as u64 >= u32::MAX as u64 {
        return Err(Error::Capacity(format!("stream of {} tokens exceeds 2^32 - 1", tokens.len())));
    }

    let sentinel_base = vocab.len() as u32;
    for (k, d) in docs.iter().skip(1).enumerate() {
        tokens[d.start - 1] = sentinel_base + k as u32;
    }

    Ok(TokenStream {
        tokens,
        docs,
        vocab,
        sentinel_base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Domain};
    use crate::rng::SplitMix64;

    fn shard(texts: &[&str], prefix: &str) -> CorpusShard {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("{prefix}{i}"), "s", Domain::Formal, *t))
            .collect();
        CorpusShard::new("s", docs).unwrap()
    }

    #[test]
    fn separator_accounting() {
        let s = build_stream(&[shard(&["a b c", "a b d"], "x")]).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.tokens()[3], s.sentinel_base());
        assert!(s.is_separator(3));
        assert_eq!(s.doc_at(3), None);
        assert_eq!(s.doc_at(4), Some(1));
        assert_eq!(s.tokens()[..2], s.tokens()[4..6]);
        assert_ne!(s.tokens()[2], s.tokens()[6]);
    }

    #[test]
    fn empty_corpus() {
        let s = build_stream(&[]).unwrap();
        assert!(s.is_empty());
        let s = build_stream(&[shard(&[], "x")]).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn separators_are_unique() {
        let s = build_stream(&[shard(&["a", "", "", "b"], "x"), shard(&["a"], "y")]).unwrap();
        let seps: Vec<u32> = (0..s.len()).filter(|&p| s.is_separator(p)).map(|p| s.tokens()[p]).collect();
        assert_eq!(seps.len(), 4);
        let uniq: HashSet<_> = seps.iter().collect();
        assert_eq!(uniq.len(), 4);
        assert_eq!(s.alphabet_size(), 2 + 4);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = shard(&["a"], "x");
        assert!(matches!(build_stream(&[a.clone(), a]), Err(Error::Integrity(_))));
    }

    #[test]
    fn boundaries_round_trip() {
        let mut rng = SplitMix64::new(3);
        let words = ["der", "die", "das", "Haus", "läuft", "&", "42"];
        let texts: Vec<String> = (0..60)
            .map(|_| {
                (0..rng.below(12))
                    .map(|_| words[rng.below(words.len() as u64) as usize])
                    .collect::<Vec<_>>()
                    .join("  ")
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let (a, b) = refs.split_at(25);
        let s = build_stream(&[shard(a, "a"), shard(b, "b")]).unwrap();
        assert_eq!(s.docs().len(), 60);
        let mut expected_end = 0;
        for (i, d) in s.docs().iter().enumerate() {
            if i > 0 {
                assert_eq!(d.start, expected_end + 1, "exactly one separator between documents");
            }
            expected_end = d.end;
            assert_eq!(s.detokenize(i), tokenize(refs[i]).join(" "));
        }
        assert_eq!(expected_end, s.len());
    }
}
