//! Dataset assembly from labelled sources with seeded token-budget trimming.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{read_shard, CorpusShard, Domain};
use crate::error::{Error, Result};
use crate::report::CompositionReport;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub domain: Domain,
    #[serde(default)]
    pub shards: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub budget_tokens: Option<u64>,
    #[serde(default)]
    pub trim_source: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let spec: DatasetSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner()))
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.sources {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Config(format!("dataset `{}`: source `{}` listed twice", self.name, s.name)));
            }
        }
        if let Some(t) = &self.trim_source {
            if !seen.contains(t.as_str()) {
                return Err(Error::Config(format!(
                    "dataset `{}`: trim_source `{t}` is not among its sources",
                    self.name
                )));
            }
        }
        if self.budget_tokens.is_some() && self.trim_source.is_none() {
            return Err(Error::Config(format!(
                "dataset `{}`: budget_tokens needs a trim_source",
                self.name
            )));
        }
        Ok(())
    }
}

/// An assembled dataset: one shard per source, in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub shards: Vec<CorpusShard>,
    pub report: CompositionReport,
}

impl Dataset {
    pub fn token_count(&self) -> u64 {
        self.shards.iter().map(CorpusShard::token_count).sum()
    }
}

/// Reads every shard of every source and assembles the dataset.
pub fn assemble(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let loaded = spec
        .sources
        .iter()
        .map(|s| s.shards.iter().map(read_shard).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    assemble_loaded(spec, loaded)
}

/// Assembles from shards already in memory; `loaded[i]` belongs to
/// `spec.sources[i]`.
pub fn assemble_loaded(spec: &DatasetSpec, loaded: Vec<Vec<CorpusShard>>) -> Result<Dataset> {
    spec.validate()?;
    if loaded.len() != spec.sources.len() {
        return Err(Error::Config(format!(
            "dataset `{}`: {} sources but {} shard lists",
            spec.name,
            spec.sources.len(),
            loaded.len()
        )));
    }
    let mut shards = Vec::with_capacity(loaded.len());
    for (src, parts) in spec.sources.iter().zip(loaded) {
        let mut docs = Vec::new();
        for part in parts {
            docs.extend(part.into_documents());
        }
        if let Some(d) = docs.iter().find(|d| d.domain != src.domain) {
            return Err(Error::Integrity(format!(
                "document `{}` has domain {} but source `{}` is declared {}",
                d.id, d.domain, src.name, src.domain
            )));
        }
        shards.push(CorpusShard::new(src.name.clone(), docs)?);
    }
    if let (Some(budget), Some(trim)) = (spec.budget_tokens, &spec.trim_source) {
        shards = trim_to_budget(&shards, trim, budget, spec.seed)?;
    }
    let report = CompositionReport::from_shards(
        &spec.name,
        spec.sources.iter().map(|s| s.domain).zip(shards.iter()),
    );
    Ok(Dataset {
        name: spec.name.clone(),
        shards,
        report,
    })
}

/// Removes documents of the shards named `source` in a seeded uniform random
/// order until the total is within `budget`. Stops at the first document that
/// brings the total under budget, so the result is at least
/// `budget - (largest removed document) + 1` when anything was removed.
pub fn trim_to_budget(shards: &[CorpusShard], source: &str, budget: u64, seed: u64) -> Result<Vec<CorpusShard>> {
    let total: u64 = shards.iter().map(CorpusShard::token_count).sum();
    if total <= budget {
        return Ok(shards.to_vec());
    }
    let candidates: Vec<(usize, usize, u64)> = shards
        .iter()
        .enumerate()
        .filter(|(_, s)| s.source() == source)
        .flat_map(|(si, s)| {
            s.documents()
                .iter()
                .enumerate()
                .map(move |(di, d)| (si, di, d.token_count() as u64))
        })
        .collect();
    let removable: u64 = candidates.iter().map(|c| c.2).sum();
    if total - removable > budget {
        return Err(Error::BudgetUnreachable {
            source_name: source.to_string(),
            budget,
            minimum: total - removable,
        });
    }

    let mut order = candidates;
    SplitMix64::new(seed).shuffle(&mut order);
    let mut removed: HashSet<(usize, usize)> = HashSet::new();
    let mut remaining = total;
    for (si, di, n) in order {
        if remaining <= budget {
            break;
        }
        removed.insert((si, di));
        remaining -= n;
    }

    Ok(shards
        .iter()
        .enumerate()
        .map(|(si, s)| {
            if s.source() != source {
                return s.clone();
            }
            let mut di = 0;
            s.retain(|_| {
                let keep = !removed.contains(&(si, di));
                di += 1;
                keep
            })
        })
        .collect())
}
