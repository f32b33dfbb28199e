use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream::TokenStream;
use super::suffix::SuffixIndex;

/// A maximal run of tokens in one document that also occurs at another
/// stream position (possibly in the same document).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateSpan {
    pub doc_id: String,
    pub token_start: usize,
    pub token_len: usize,
    pub match_doc_id: String,
    pub match_token_start: usize,
}

/// For every stream position, the longest prefix it shares with another
/// suffix, and where that other suffix starts.
fn longest_repeats(index: &SuffixIndex) -> (Vec<u32>, Vec<u32>) {
    let sa = index.suffix_array();
    let lcp = index.lcp();
    let n = sa.len();
    let per_rank: Vec<(u32, u32)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let prev = if r > 0 { lcp[r - 1] } else { 0 };
            let next = if r + 1 < n { lcp[r] } else { 0 };
            if prev >= next && prev > 0 {
                (prev, sa[r - 1])
            } else if next > 0 {
                (next, sa[r + 1])
            } else {
                (0, u32::MAX)
            }
        })
        .collect();
    let mut len = vec![0u32; n];
    let mut partner = vec![u32::MAX; n];
    for (r, (l, p)) in per_rank.into_iter().enumerate() {
        let pos = sa[r] as usize;
        len[pos] = l;
        partner[pos] = p;
    }
    (len, partner)
}

/// Finds every maximal repeated span of at least `min_match` tokens.
///
/// A position starts a reported span when its longest repeat is at least
/// `min_match` long and is not contained in the repeat starting one token
/// earlier. Every position covered by some repeat of length `>= min_match`
/// is covered by a reported span. Spans come out in stream order.
pub fn find_duplicates(index: &SuffixIndex, stream: &TokenStream, min_match: usize) -> Vec<DuplicateSpan> {
    assert!(min_match >= 2, "min_match must be at least 2");
    if stream.is_empty() {
        return Vec::new();
    }
    let (len, partner) = longest_repeats(index);
    let docs = stream.docs();
    let mut spans = Vec::new();
    for pos in 0..len.len() {
        let m = len[pos] as usize;
        if m < min_match {
            continue;
        }
        if pos > 0 && len[pos - 1] as usize > m {
            continue;
        }
        let q = partner[pos] as usize;
        let d = &docs[stream.doc_at(pos).expect("repeats never start on a separator")];
        let md = &docs[stream.doc_at(q).expect("repeats never start on a separator")];
        debug_assert!(pos + m <= d.end && q + m <= md.end);
        spans.push(DuplicateSpan {
            doc_id: d.id.clone(),
            token_start: pos - d.start,
            token_len: m,
            match_doc_id: md.id.clone(),
            match_token_start: q - md.start,
        });
    }
    for s in &spans {
        assert!(verify_span(stream, s), "self-check failed for span {s:?}");
    }
    spans
}

/// Confirms that `span` and its recorded match are equal token sequences at
/// two distinct stream positions, both inside their documents.
pub fn verify_span(stream: &TokenStream, span: &DuplicateSpan) -> bool {
    let find = |id: &str| stream.docs().iter().find(|d| d.id == id);
    let (Some(d), Some(md)) = (find(&span.doc_id), find(&span.match_doc_id)) else {
        return false;
    };
    if span.token_start + span.token_len > d.len() || span.match_token_start + span.token_len > md.len() {
        return false;
    }
    let a = d.start + span.token_start;
    let b = md.start + span.match_token_start;
    let t = stream.tokens();
    a != b && t[a..a + span.token_len] == t[b..b + span.token_len]
}

/// Number of tokens covered by the union of the spans, per document, summed.
pub fn covered_tokens(spans: &[DuplicateSpan]) -> u64 {
    let mut by_doc: std::collections::BTreeMap<&str, Vec<(usize, usize)>> = Default::default();
    for s in spans {
        by_doc
            .entry(s.doc_id.as_str())
            .or_default()
            .push((s.token_start, s.token_start + s.token_len));
    }
    let mut total = 0u64;
    for (_, mut iv) in by_doc {
        iv.sort_unstable();
        let mut cur: Option<(usize, usize)> = None;
        for (a, b) in iv {
            cur = match cur {
                Some((s, e)) if a <= e => Some((s, e.max(b))),
                Some((s, e)) => {
                    total += (e - s) as u64;
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        if let Some((s, e)) = cur {
            total += (e - s) as u64;
        }
    }
    total
}
