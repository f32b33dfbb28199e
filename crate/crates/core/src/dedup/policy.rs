use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::find::{covered_tokens, DuplicateSpan};
use super::stream::{build_stream, TokenStream};
use super::suffix::{build_suffix_index, SuffixIndex};
use crate::config::DedupPolicy;
use crate::corpus::CorpusShard;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub stage: String,
    pub input_docs: u64,
    pub input_tokens: u64,
    /// Tokens covered by duplicate spans, every occurrence counted.
    pub duplicate_tokens: u64,
    pub removed_docs: u64,
    pub removed_tokens: u64,
    pub spans: u64,
}

impl DedupReport {
    pub(crate) fn empty(stage: &str, shards: &[CorpusShard]) -> Self {
        DedupReport {
            stage: stage.to_string(),
            input_docs: shards.iter().map(|s| s.len() as u64).sum(),
            input_tokens: shards.iter().map(|s| s.token_count()).sum(),
            duplicate_tokens: 0,
            removed_docs: 0,
            removed_tokens: 0,
            spans: 0,
        }
    }
}

/// Removes documents according to `policy` and reports the totals.
///
/// `KeepFirst` needs every occurrence of each span, so it indexes the shards
/// again; use [`apply_policy_indexed`] when an index is already at hand.
pub fn apply_policy(
    shards: &[CorpusShard],
    spans: &[DuplicateSpan],
    policy: DedupPolicy,
    stage: &str,
) -> Result<(Vec<CorpusShard>, DedupReport)> {
    match policy {
        DedupPolicy::RemoveAll => {
            let stream = build_stream(shards)?;
            apply_policy_indexed(shards, &stream, None, spans, policy, stage)
        }
        DedupPolicy::KeepFirst => {
            let stream = build_stream(shards)?;
            let index = build_suffix_index(&stream);
            apply_policy_indexed(shards, &stream, Some(&index), spans, policy, stage)
        }
    }
}

pub fn apply_policy_indexed(
    shards: &[CorpusShard],
    stream: &TokenStream,
    index: Option<&SuffixIndex>,
    spans: &[DuplicateSpan],
    policy: DedupPolicy,
    stage: &str,
) -> Result<(Vec<CorpusShard>, DedupReport)> {
    let by_id: HashMap<&str, usize> = stream
        .docs()
        .iter()
        .map(|d| (d.id.as_str(), d.doc_index))
        .collect();
    let mut spans_of: Vec<Vec<&DuplicateSpan>> = vec![Vec::new(); stream.docs().len()];
    for s in spans {
        let Some(&di) = by_id.get(s.doc_id.as_str()) else {
            return Err(Error::Integrity(format!("span references unknown document `{}`", s.doc_id)));
        };
        if !by_id.contains_key(s.match_doc_id.as_str()) {
            return Err(Error::Integrity(format!(
                "span references unknown document `{}`",
                s.match_doc_id
            )));
        }
        if s.token_start + s.token_len > stream.docs()[di].len() {
            return Err(Error::Integrity(format!("span {s:?} exceeds its document")));
        }
        spans_of[di].push(s);
    }

    let removed: Vec<bool> = match policy {
        DedupPolicy::RemoveAll => spans_of.iter().map(|v| !v.is_empty()).collect(),
        DedupPolicy::KeepFirst => {
            let index = index.ok_or_else(|| {
                Error::Integrity("keep_first requires a suffix index of the shards".into())
            })?;
            keep_first(stream, index, &spans_of)
        }
    };

    let removed_ids: HashSet<&str> = stream
        .docs()
        .iter()
        .filter(|d| removed[d.doc_index])
        .map(|d| d.id.as_str())
        .collect();
    let mut report = DedupReport::empty(stage, shards);
    report.duplicate_tokens = covered_tokens(spans);
    report.spans = spans.len() as u64;
    let out = shards
        .iter()
        .map(|shard| {
            shard.retain(|d| {
                let gone = removed_ids.contains(d.id.as_str());
                if gone {
                    report.removed_docs += 1;
                    report.removed_tokens += d.token_count() as u64;
                }
                !gone
            })
        })
        .collect();
    Ok((out, report))
}

/// Walks documents in stream order. A document with spans is dropped when each
/// of its spans also occurs in an earlier document that was kept.
fn keep_first(stream: &TokenStream, index: &SuffixIndex, spans_of: &[Vec<&DuplicateSpan>]) -> Vec<bool> {
    let docs = stream.docs();
    let tokens = stream.tokens();
    let sa = index.suffix_array();
    let mut removed = vec![false; docs.len()];
    for (di, spans) in spans_of.iter().enumerate() {
        if spans.is_empty() {
            continue;
        }
        let all_resolved = spans.iter().all(|s| {
            let start = docs[di].start + s.token_start;
            let pattern = &tokens[start..start + s.token_len];
            index.find_range(tokens, pattern).any(|r| {
                stream
                    .doc_at(sa[r] as usize)
                    .is_some_and(|other| other < di && !removed[other])
            })
        });
        removed[di] = all_resolved;
    }
    removed
}
