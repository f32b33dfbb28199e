//! Interpolated modified Kneser-Ney n-gram model.
//!
//! Every document is one training sequence: `order - 1` copies of `<s>`, the
//! tokens, then `</s>`. The highest order uses raw counts; every lower order
//! uses continuation counts (the number of distinct left extensions). Each
//! order gets its own three discounts, estimated from count-of-counts.
//!
//! The estimated model is stored in backoff form, the same shape as an ARPA
//! file: every observed n-gram holds its final interpolated probability, and
//! every observed context holds the weight that scales the lower-order
//! distribution for unseen continuations.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{CorpusShard, Document};
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;

pub const FALLBACK_DISCOUNT: f64 = 0.75;

/// Discounts for adjusted counts of 1, 2 and 3 or more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
    pub fallback: bool,
}

impl Discounts {
    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }

    /// Estimates from the number of n-grams seen exactly 1, 2, 3 and 4 times.
    pub fn estimate(n: [u64; 4]) -> Self {
        if n.contains(&0) {
            return Discounts {
                d1: FALLBACK_DISCOUNT,
                d2: FALLBACK_DISCOUNT,
                d3plus: FALLBACK_DISCOUNT,
                fallback: true,
            };
        }
        let [n1, n2, n3, n4] = n.map(|c| c as f64);
        let y = n1 / (n1 + 2.0 * n2);
        Discounts {
            d1: (1.0 - 2.0 * y * n2 / n1).clamp(0.0, 1.0),
            d2: (2.0 - 3.0 * y * n3 / n2).clamp(0.0, 2.0),
            d3plus: (3.0 - 4.0 * y * n4 / n3).clamp(0.0, 3.0),
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub prob: f64,
    /// Present only for n-grams that occur as a context.
    pub backoff: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    pub(crate) order: usize,
    pub(crate) words: Vec<String>,
    pub(crate) ids: HashMap<String, u32>,
    /// `tables[k - 1]` holds the k-grams.
    pub(crate) tables: Vec<HashMap<Box<[u32]>, Entry>>,
    pub(crate) discounts: Option<Vec<Discounts>>,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub order: usize,
    pub min_count: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { order: 5, min_count: 2 }
    }
}

fn pad_sequence(order: usize, ids: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut seq = vec![BOS_ID; order - 1];
    seq.extend(ids);
    seq.push(EOS_ID);
    seq
}

#[derive(Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    n1: u64,
    n2: u64,
    n3plus: u64,
}

impl ContextStats {
    fn add(&mut self, count: u64) {
        self.total += count;
        match count {
            1 => self.n1 += 1,
            2 => self.n2 += 1,
            _ => self.n3plus += 1,
        }
    }

    fn gamma(&self, d: &Discounts) -> f64 {
        (d.d1 * self.n1 as f64 + d.d2 * self.n2 as f64 + d.d3plus * self.n3plus as f64)
            / self.total as f64
    }
}

/// Trains on every document of `reference`. Tokens seen fewer than
/// `min_count` times become `<unk>`.
pub fn train_ngram(reference: &[CorpusShard], opts: &TrainOptions) -> Result<NgramModel> {
    let order = opts.order;
    if order < 1 {
        return Err(Error::Config("n-gram order must be >= 1".into()));
    }
    let docs: Vec<&Document> = reference.iter().flat_map(|s| s.documents()).collect();
    if docs.is_empty() {
        return Err(Error::Config("reference corpus is empty".into()));
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for d in &docs {
        for t in tokenize(&d.text) {
            *freq.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<&str> = freq
        .iter()
        .filter(|(w, &c)| c >= opts.min_count && ![UNK, BOS, EOS].contains(w))
        .map(|(w, _)| *w)
        .collect();
    kept.sort_unstable();
    let words: Vec<String> = [UNK, BOS, EOS]
        .into_iter()
        .chain(kept)
        .map(str::to_string)
        .collect();
    let ids: HashMap<String, u32> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();

    // adjusted[k - 1]: raw counts at the top order, continuation counts below
    let mut adjusted: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
    for d in &docs {
        let seq = pad_sequence(
            order,
            tokenize(&d.text)
                .into_iter()
                .map(|t| ids.get(t).copied().unwrap_or(UNK_ID)),
        );
        for end in order..=seq.len() {
            *adjusted[order - 1]
                .entry(seq[end - order..end].into())
                .or_default() += 1;
        }
    }
    for k in (1..order).rev() {
        let (lower, upper) = adjusted.split_at_mut(k);
        for gram in upper[0].keys() {
            *lower[k - 1].entry(gram[1..].into()).or_default() += 1;
        }
    }

    let discounts: Vec<Discounts> = adjusted
        .iter()
        .enumerate()
        .map(|(k, counts)| {
            let mut n = [0u64; 4];
            for &c in counts.values() {
                if (1..=4).contains(&c) {
                    n[c as usize - 1] += 1;
                }
            }
            let d = Discounts::estimate(n);
            if d.fallback {
                log::warn!(
                    "order {}: count-of-counts {:?} too sparse for discount estimation, using {}",
                    k + 1,
                    n,
                    FALLBACK_DISCOUNT
                );
            }
            d
        })
        .collect();

    let mut model = NgramModel {
        order,
        words,
        ids,
        tables: vec![HashMap::new(); order],
        discounts: None,
    };

    // unigrams: interpolate with the uniform distribution over every
    // predictable word (the whole vocabulary except <s>)
    let mut root = ContextStats::default();
    for &c in adjusted[0].values() {
        root.add(c);
    }
    let predictable = (model.words.len() - 1) as f64;
    let gamma = root.gamma(&discounts[0]);
    for id in 0..model.words.len() as u32 {
        if id == BOS_ID {
            continue;
        }
        let a = adjusted[0].get(&[id][..]).copied().unwrap_or(0);
        let prob = (a as f64 - discounts[0].for_count(a)) / root.total as f64 + gamma / predictable;
        model.tables[0].insert(Box::new([id]), Entry { prob, backoff: None });
    }
    model.tables[0].insert(Box::new([BOS_ID]), Entry { prob: 0.0, backoff: None });

    for k in 2..=order {
        let d = &discounts[k - 1];
        let mut contexts: HashMap<&[u32], ContextStats> = HashMap::new();
        for (gram, &c) in &adjusted[k - 1] {
            contexts.entry(&gram[..k - 1]).or_default().add(c);
        }
        let mut entries = Vec::with_capacity(adjusted[k - 1].len());
        for (gram, &c) in &adjusted[k - 1] {
            let ctx = &contexts[&gram[..k - 1]];
            let lower = model.prob(&gram[1..k - 1], gram[k - 1]);
            let prob = (c as f64 - d.for_count(c)) / ctx.total as f64 + ctx.gamma(d) * lower;
            entries.push((gram.clone(), prob));
        }
        for (h, stats) in contexts {
            let bow = stats.gamma(d);
            model.tables[k - 2]
                .entry(h.into())
                .or_insert(Entry { prob: 0.0, backoff: None })
                .backoff = Some(bow);
        }
        for (gram, prob) in entries {
            model.tables[k - 1].insert(gram, Entry { prob, backoff: None });
        }
    }

    model.discounts = Some(discounts);
    Ok(model)
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    /// Per-order discounts; `None` for models loaded from ARPA.
    pub fn discounts(&self) -> Option<&[Discounts]> {
        self.discounts.as_deref()
    }

    /// Ids of every word the model can predict (all but `<s>`).
    pub fn predictable(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.words.len() as u32).filter(|&i| i != BOS_ID)
    }

    /// Contexts (as id sequences) that carry a backoff weight, by length.
    pub fn contexts(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self.tables[..self.order - 1]
            .iter()
            .flat_map(|t| t.iter().filter(|(_, e)| e.backoff.is_some()).map(|(g, _)| g.to_vec()))
            .collect();
        out.sort();
        out
    }

    /// p(word | context), using at most the last `order - 1` context ids.
    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        let mut key: Vec<u32> = Vec::with_capacity(keep + 1);
        let mut scale = 1.0;
        for start in 0..=ctx.len() {
            let h = &ctx[start..];
            key.clear();
            key.extend_from_slice(h);
            key.push(word);
            if let Some(e) = self.tables[h.len()].get(&key[..]) {
                return scale * e.prob;
            }
            if !h.is_empty() {
                if let Some(bow) = self.tables[h.len() - 1].get(h).and_then(|e| e.backoff) {
                    scale *= bow;
                }
            }
        }
        // only reachable for ids outside the vocabulary
        0.0
    }

    pub fn word_prob(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        self.prob(&ctx, self.id(word))
    }

    /// Natural-log probability of the padded document and the number of
    /// predicted tokens (the document's tokens plus `</s>`).
    pub fn log_prob(&self, text: &str) -> Result<(f64, usize)> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Unscorable("empty document".into()));
        }
        let seq = pad_sequence(self.order, tokens.into_iter().map(|t| self.id(t)));
        let start = self.order - 1;
        let mut sum = 0.0;
        for i in start..seq.len() {
            sum += self.prob(&seq[..i], seq[i]).ln();
        }
        Ok((sum, seq.len() - start))
    }

    /// Number of stored n-grams per order, including context-only entries.
    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    pub(crate) fn sorted_entries(&self, k: usize) -> Vec<(Vec<&str>, Entry)> {
        let mut rows: BTreeMap<Vec<&str>, Entry> = BTreeMap::new();
        for (g, e) in &self.tables[k - 1] {
            rows.insert(g.iter().map(|&i| self.words[i as usize].as_str()).collect(), *e);
        }
        rows.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;

    fn corpus(texts: &[&str]) -> Vec<CorpusShard> {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("w{i}"), "wiki", Domain::Formal, *t))
            .collect();
        vec![CorpusShard::new("wiki", docs).unwrap()]
    }

    #[test]
    fn unigram_normalizes() {
        let m = train_ngram(&corpus(&["a a b"]), &TrainOptions { order: 1, min_count: 1 }).unwrap();
        let sum: f64 = ["a", "b", UNK, EOS].iter().map(|w| m.word_prob(&[], w)).sum();
        assert!((sum - 1.0).abs() < 1e-9, "{sum}");
        assert!(m.word_prob(&[], "a") > m.word_prob(&[], "b"));
    }

    #[test]
    fn chen_goodman_discounts() {
        let d = Discounts::estimate([10, 4, 2, 1]);
        let y = 10.0 / 18.0;
        assert!((d.d1 - (1.0 - 2.0 * y * 0.4)).abs() < 1e-12);
        assert!((d.d2 - (2.0 - 3.0 * y * 0.5)).abs() < 1e-12);
        assert!((d.d3plus - (3.0 - 4.0 * y * 0.5)).abs() < 1e-12);
        assert!(!d.fallback);
        let f = Discounts::estimate([3, 0, 1, 1]);
        assert!(f.fallback);
        assert_eq!(f.d2, FALLBACK_DISCOUNT);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_ngram(&[], &TrainOptions::default()).is_err());
        assert!(train_ngram(&corpus(&["a"]), &TrainOptions { order: 0, min_count: 1 }).is_err());
    }

    #[test]
    fn min_count_maps_rare_words_to_unk() {
        let m = train_ngram(&corpus(&["a a b"]), &TrainOptions { order: 2, min_count: 2 }).unwrap();
        assert_eq!(m.id("a"), 3);
        assert_eq!(m.id("b"), UNK_ID);
        assert_eq!(m.vocab().len(), 4);
    }

    #[test]
    fn empty_document_is_unscorable() {
        let m = train_ngram(&corpus(&["a b"]), &TrainOptions { order: 3, min_count: 1 }).unwrap();
        assert!(matches!(m.log_prob("  "), Err(Error::Unscorable(_))));
        let (lp, n) = m.log_prob("a").unwrap();
        assert_eq!(n, 2);
        assert!(lp.is_finite() && lp < 0.0);
    }
}
