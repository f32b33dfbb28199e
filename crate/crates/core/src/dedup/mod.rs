//! Exact-substring deduplication over whitespace-token streams.
//!
//! Documents are concatenated into a [`TokenStream`], indexed with a suffix
//! array, and every token sequence of at least `min_match` tokens that occurs
//! twice is reported as a [`DuplicateSpan`]. A removal policy then drops whole
//! documents.

mod find;
mod policy;
mod stream;
mod suffix;

pub use find::{covered_tokens, find_duplicates, verify_span, DuplicateSpan};
pub use policy::{apply_policy, apply_policy_indexed, DedupReport};
pub use stream::{build_stream, DocSpan, TokenStream, Vocab};
pub use suffix::{build_suffix_index, lcp_array, suffix_array, SuffixIndex};

use std::collections::HashSet;

use rayon::prelude::*;

use crate::config::DedupPolicy;
use crate::corpus::CorpusShard;
use crate::error::{Error, Result};

pub const COMBINED_STAGE: &str = "combined";

/// One dedup pass over `shards` as a single corpus.
pub fn dedup_shards(
    shards: &[CorpusShard],
    min_match: usize,
    policy: DedupPolicy,
    stage: &str,
) -> Result<(Vec<CorpusShard>, DedupReport, Vec<DuplicateSpan>)> {
    if min_match < 2 {
        return Err(Error::Config(format!("min_match must be >= 2, got {min_match}")));
    }
    let stream = build_stream(shards)?;
    if stream.is_empty() {
        return Ok((shards.to_vec(), DedupReport::empty(stage, shards), Vec::new()));
    }
    let index = build_suffix_index(&stream);
    let spans = find_duplicates(&index, &stream, min_match);
    let (out, report) = apply_policy_indexed(shards, &stream, Some(&index), &spans, policy, stage)?;
    Ok((out, report, spans))
}

#[derive(Debug, Clone)]
pub struct StageGroup {
    pub name: String,
    pub shards: Vec<CorpusShard>,
}

#[derive(Debug, Clone)]
pub struct StagedOutput {
    pub groups: Vec<StageGroup>,
    /// One report per group, then the combined report when there are at
    /// least two groups.
    pub reports: Vec<DedupReport>,
}

/// Dedups each group on its own, then the survivors of all groups together.
///
/// With a single group the combined pass is skipped; the result is the
/// single-stage result.
pub fn staged_dedup(groups: Vec<StageGroup>, min_match: usize, policy: DedupPolicy) -> Result<StagedOutput> {
    let mut names = HashSet::new();
    for g in &groups {
        if !names.insert(g.name.as_str()) {
            return Err(Error::Config(format!("duplicate dedup group `{}`", g.name)));
        }
        if g.name == COMBINED_STAGE && groups.len() > 1 {
            return Err(Error::Config(format!("group name `{COMBINED_STAGE}` is reserved")));
        }
    }

    let stage1: Vec<(Vec<CorpusShard>, DedupReport)> = groups
        .par_iter()
        .map(|g| dedup_shards(&g.shards, min_match, policy, &g.name).map(|(s, r, _)| (s, r)))
        .collect::<Result<_>>()?;

    let mut reports: Vec<DedupReport> = stage1.iter().map(|(_, r)| r.clone()).collect();
    let mut survivors: Vec<StageGroup> = groups
        .into_iter()
        .zip(stage1)
        .map(|(g, (shards, _))| StageGroup { name: g.name, shards })
        .collect();

    if survivors.len() >= 2 {
        let counts: Vec<usize> = survivors.iter().map(|g| g.shards.len()).collect();
        let all: Vec<CorpusShard> = survivors.iter().flat_map(|g| g.shards.iter().cloned()).collect();
        let (out, report, _) = dedup_shards(&all, min_match, policy, COMBINED_STAGE)?;
        reports.push(report);
        let mut it = out.into_iter();
        for (g, n) in survivors.iter_mut().zip(counts) {
            g.shards = it.by_ref().take(n).collect();
        }
    }
    Ok(StagedOutput {
        groups: survivors,
        reports,
    })
}
