use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ngram::NgramModel;
use crate::corpus::{CorpusShard, Document};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityScore {
    pub doc_id: String,
    pub log_prob_sum: f64,
    pub token_count: usize,
    pub perplexity: f64,
}

impl PerplexityScore {
    pub fn new(doc_id: impl Into<String>, log_prob_sum: f64, token_count: usize) -> Self {
        Self {
            doc_id: doc_id.into(),
            log_prob_sum,
            token_count,
            perplexity: (-log_prob_sum / token_count as f64).exp(),
        }
    }
}

/// Per-token perplexity of `doc`; empty documents are unscorable.
pub fn score_perplexity(model: &NgramModel, doc: &Document) -> Result<PerplexityScore> {
    let (lp, n) = model.log_prob(&doc.text)?;
    Ok(PerplexityScore::new(doc.id.clone(), lp, n))
}

fn by_perplexity(a: &PerplexityScore, b: &PerplexityScore) -> Ordering {
    a.perplexity
        .total_cmp(&b.perplexity)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Ids of the `k` lowest-perplexity documents, ties by ascending id.
pub fn select_top_k(scores: &[PerplexityScore], k: usize) -> Vec<String> {
    if k == 0 {
        return Vec::new();
    }
    let mut refs: Vec<&PerplexityScore> = scores.iter().collect();
    if k < refs.len() {
        refs.select_nth_unstable_by(k - 1, |a, b| by_perplexity(a, b));
        refs.truncate(k);
    }
    refs.sort_unstable_by(|a, b| by_perplexity(a, b));
    refs.into_iter().map(|s| s.doc_id.clone()).collect()
}

/// Scores every document of the shards in order; unscorable documents are
/// skipped.
pub fn score_shards(model: &NgramModel, shards: &[CorpusShard]) -> Vec<PerplexityScore> {
    let docs: Vec<&Document> = shards.iter().flat_map(|s| s.documents()).collect();
    docs.par_iter()
        .filter_map(|d| score_perplexity(model, d).ok())
        .collect()
}

/// Keeps the `k` lowest-perplexity documents across `shards`, preserving
/// their original order. Returns the filtered shards and every score.
pub fn quality_filter(
    model: &NgramModel,
    shards: &[CorpusShard],
    k: usize,
) -> (Vec<CorpusShard>, Vec<PerplexityScore>) {
    let scores = score_shards(model, shards);
    let keep: std::collections::HashSet<String> = select_top_k(&scores, k).into_iter().collect();
    let out = shards.iter().map(|s| s.retain(|d| keep.contains(&d.id))).collect();
    (out, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, ppl: f64) -> PerplexityScore {
        PerplexityScore {
            doc_id: id.into(),
            log_prob_sum: 0.0,
            token_count: 1,
            perplexity: ppl,
        }
    }

    #[test]
    fn ordering() {
        let scores = [s("A", 10.0), s("B", 5.0), s("C", 20.0)];
        assert!(select_top_k(&scores, 0).is_empty());
        assert_eq!(select_top_k(&scores, 2), vec!["B", "A"]);
        assert_eq!(select_top_k(&scores, 10), vec!["B", "A", "C"]);
    }

    #[test]
    fn ties_by_id() {
        let scores = [s("z", 1.0), s("a", 1.0), s("m", 1.0)];
        assert_eq!(select_top_k(&scores, 2), vec!["a", "m"]);
    }

    #[test]
    fn perplexity_definition() {
        let p = PerplexityScore::new("d", -4.0 * 2f64.ln(), 4);
        assert!((p.perplexity - 2.0).abs() < 1e-12);
    }
}
