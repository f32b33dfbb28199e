use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DedupPolicy {
    /// Every document containing a duplicate span is dropped.
    #[default]
    RemoveAll,
    /// The earliest copy survives; later documents whose spans all have a
    /// retained earlier copy are dropped.
    KeepFirst,
}

impl std::str::FromStr for DedupPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remove_all" | "remove-all" => Ok(DedupPolicy::RemoveAll),
            "keep_first" | "keep-first" => Ok(DedupPolicy::KeepFirst),
            other => Err(Error::Config(format!("unknown dedup policy `{other}`"))),
        }
    }
}

/// Thresholds and seeds shared by the pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub min_match_tokens: usize,
    pub langid_threshold: f64,
    pub min_words: usize,
    pub ngram_order: usize,
    pub quality_top_k: usize,
    pub chunk_budget_tokens: usize,
    pub mix_seed: u64,
    pub dedup_policy: DedupPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_match_tokens: 100,
            langid_threshold: 0.9,
            min_words: 20,
            ngram_order: 5,
            quality_top_k: 2_000_000,
            chunk_budget_tokens: 128,
            mix_seed: 0,
            dedup_policy: DedupPolicy::RemoveAll,
        }
    }
}

impl PipelineConfig {
    /// Returns `(field, message)` for every violated constraint.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.min_match_tokens < 2 {
            out.push((
                "min_match_tokens",
                format!("must be >= 2, got {}", self.min_match_tokens),
            ));
        }
        if !(0.0..=1.0).contains(&self.langid_threshold) {
            out.push((
                "langid_threshold",
                format!("must be within [0, 1], got {}", self.langid_threshold),
            ));
        }
        if self.ngram_order < 1 {
            out.push(("ngram_order", "must be >= 1, got 0".to_string()));
        }
        if self.quality_top_k < 1 {
            out.push(("quality_top_k", "must be >= 1, got 0".to_string()));
        }
        if self.chunk_budget_tokens < 1 {
            out.push(("chunk_budget_tokens", "must be >= 1, got 0".to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some((field, msg)) => Err(Error::Config(format!("{field}: {msg}"))),
        }
    }
}
