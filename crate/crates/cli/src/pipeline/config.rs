//! The pipeline configuration file and its validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use korpus::chunker::TranslatorSpec;
use korpus::dedup::COMBINED_STAGE;
use korpus::langid::DEFAULT_BUCKETS;
use korpus::{Domain, Error, PipelineConfig, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    #[serde(default)]
    pub settings: PipelineConfig,
    pub sources: Vec<SourceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub langid: Option<LangIdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<LmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translator: Option<TranslatorSection>,
    /// Without datasets a single dataset `all` holds every source.
    #[serde(default)]
    pub datasets: Vec<DatasetEntry>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub name: String,
    pub domain: Domain,
    /// Glob patterns, relative to the config file.
    pub shards: Vec<String>,
    #[serde(default = "yes")]
    pub preprocess: bool,
    #[serde(default)]
    pub langid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_group: Option<String>,
    #[serde(default)]
    pub quality_filter: bool,
    #[serde(default)]
    pub translate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangIdSection {
    pub target: String,
    /// A trained model; when absent one is trained from `training`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Language label to shard globs.
    #[serde(default)]
    pub training: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_buckets")]
    pub buckets: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    5
}

fn default_lr() -> f64 {
    0.5
}

fn default_buckets() -> usize {
    DEFAULT_BUCKETS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSection {
    /// An ARPA file; when absent a model is trained on `train_sources`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub train_sources: Vec<String>,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
}

fn default_min_count() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslatorSection {
    /// Program and arguments; empty means the identity translator.
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default = "default_beam")]
    pub beam_size: usize,
    #[serde(default = "default_context")]
    pub max_context: usize,
}

fn default_beam() -> usize {
    1
}

fn default_context() -> usize {
    156
}

impl TranslatorSection {
    pub fn spec(&self) -> TranslatorSpec {
        TranslatorSpec {
            name: self.command.first().cloned().unwrap_or_else(|| "identity".into()),
            beam_size: self.beam_size,
            max_context: self.max_context,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub sources: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_tokens: Option<u64>,
    /// Use the token count of an earlier dataset as the budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_budget: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_source: Option<String>,
    /// Defaults to `settings.mix_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PipelineFile {
    /// The configured datasets, or the implicit `all` dataset.
    pub fn effective_datasets(&self) -> Vec<DatasetEntry> {
        if !self.datasets.is_empty() {
            return self.datasets.clone();
        }
        vec![DatasetEntry {
            name: "all".into(),
            sources: self.sources.iter().map(|s| s.name.clone()).collect(),
            budget_tokens: None,
            match_budget: None,
            trim_source: None,
            seed: None,
        }]
    }

    /// Replaces every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        self.settings.mix_seed = seed;
        if let Some(l) = &mut self.langid {
            l.seed = seed;
        }
        for d in &mut self.datasets {
            d.seed = Some(seed);
        }
    }

    pub fn source(&self, name: &str) -> Option<&SourceEntry> {
        self.sources.iter().find(|s| s.name == name)
    }
}

/// A problem found in a config file, located by a JSON path such as
/// `$.sources[1].name`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        path: path.into(),
        message: message.into(),
    }
}

fn json_path(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s == "." {
        "$".into()
    } else {
        format!("$.{s}")
    }
}

/// A parsed config together with the directory its relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: PipelineFile,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// Expands glob patterns in sorted order.
    pub fn expand(&self, patterns: &[String]) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for p in patterns {
            out.extend(expand_glob(&self.resolve(p))?);
        }
        Ok(out)
    }
}

fn expand_glob(pattern: &Path) -> Result<Vec<PathBuf>> {
    let text = pattern.to_string_lossy();
    let paths = glob::glob(&text).map_err(|e| Error::Config(format!("bad glob `{text}`: {e}")))?;
    let mut out: Vec<PathBuf> = paths
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("glob `{text}`: {e}")))?;
    out.sort();
    Ok(out)
}

fn parse(text: &str) -> std::result::Result<PipelineFile, Diagnostic> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| diag(json_path(e.path()), e.inner().to_string()))
}

/// Reads and checks a config file. An empty list means the config can run.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = match parse(&text) {
        Ok(f) => f,
        Err(d) => return Ok(vec![d]),
    };
    let loaded = LoadedConfig {
        file,
        base_dir: base_dir(path),
    };
    Ok(check(&loaded))
}

/// Reads a config file and fails with every diagnostic if it cannot run.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut file = parse(&text).map_err(|d| Error::Config(d.to_string()))?;
    if let Some(seed) = seed_override {
        file.override_seed(seed);
    }
    let loaded = LoadedConfig {
        file,
        base_dir: base_dir(path),
    };
    let diags = check(&loaded);
    if diags.is_empty() {
        Ok(loaded)
    } else {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        Err(Error::Config(lines.join("\n")))
    }
}

fn base_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Names end up as file names in the workspace.
fn is_safe_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn check_globs(cfg: &LoadedConfig, at: &str, patterns: &[String], out: &mut Vec<Diagnostic>) {
    if patterns.is_empty() {
        out.push(diag(at, "needs at least one shard pattern"));
    }
    for (j, p) in patterns.iter().enumerate() {
        match expand_glob(&cfg.resolve(p)) {
            Ok(v) if v.is_empty() => out.push(diag(format!("{at}[{j}]"), format!("`{p}` matches no files"))),
            Ok(_) => {}
            Err(e) => out.push(diag(format!("{at}[{j}]"), e.to_string())),
        }
    }
}

fn check(cfg: &LoadedConfig) -> Vec<Diagnostic> {
    let f = &cfg.file;
    let mut out: Vec<Diagnostic> = f
        .settings
        .violations()
        .into_iter()
        .map(|(field, msg)| diag(format!("$.settings.{field}"), msg))
        .collect();

    if f.sources.is_empty() {
        out.push(diag("$.sources", "needs at least one source"));
    }
    let mut names = HashSet::new();
    for (i, s) in f.sources.iter().enumerate() {
        let at = format!("$.sources[{i}]");
        if !is_safe_name(&s.name) {
            out.push(diag(format!("{at}.name"), format!("`{}` is not a valid name ([A-Za-z0-9_.-])", s.name)));
        }
        if !names.insert(s.name.as_str()) {
            out.push(diag(format!("{at}.name"), format!("duplicate source `{}`", s.name)));
        }
        check_globs(cfg, &format!("{at}.shards"), &s.shards, &mut out);
        if let Some(g) = &s.dedup_group {
            if !is_safe_name(g) || g == COMBINED_STAGE {
                out.push(diag(format!("{at}.dedup_group"), format!("`{g}` is not a valid group name")));
            }
        }
    }

    if f.sources.iter().any(|s| s.langid) {
        match &f.langid {
            None => out.push(diag("$.langid", "required because a source enables langid")),
            Some(l) => {
                if let Some(m) = &l.model {
                    if !cfg.resolve(m).is_file() {
                        out.push(diag("$.langid.model", format!("`{m}` does not exist")));
                    }
                } else {
                    if l.training.len() < 2 {
                        out.push(diag("$.langid.training", "needs at least two languages when no model is given"));
                    }
                    if !l.training.contains_key(&l.target) {
                        out.push(diag("$.langid.target", format!("`{}` has no training data", l.target)));
                    }
                    for (lang, globs) in &l.training {
                        check_globs(cfg, &format!("$.langid.training.{lang}"), globs, &mut out);
                    }
                    if l.buckets == 0 || l.buckets > u32::MAX as usize {
                        out.push(diag("$.langid.buckets", format!("invalid bucket count {}", l.buckets)));
                    }
                    if !(l.learning_rate.is_finite() && l.learning_rate > 0.0) {
                        out.push(diag("$.langid.learning_rate", "must be positive"));
                    }
                }
            }
        }
    }

    if f.sources.iter().any(|s| s.quality_filter) {
        match &f.lm {
            None => out.push(diag("$.lm", "required because a source enables quality_filter")),
            Some(lm) => {
                if let Some(m) = &lm.model {
                    if !cfg.resolve(m).is_file() {
                        out.push(diag("$.lm.model", format!("`{m}` does not exist")));
                    }
                } else if lm.train_sources.is_empty() {
                    out.push(diag("$.lm.train_sources", "needs a source when no model is given"));
                }
                for (i, s) in lm.train_sources.iter().enumerate() {
                    if f.source(s).is_none() {
                        out.push(diag(format!("$.lm.train_sources[{i}]"), format!("unknown source `{s}`")));
                    }
                }
            }
        }
    }

    if let Some(t) = &f.translator {
        if t.beam_size == 0 {
            out.push(diag("$.translator.beam_size", "must be >= 1"));
        }
    }

    let mut ds_names: Vec<&str> = Vec::new();
    for (i, d) in f.datasets.iter().enumerate() {
        let at = format!("$.datasets[{i}]");
        if !is_safe_name(&d.name) {
            out.push(diag(format!("{at}.name"), format!("`{}` is not a valid name", d.name)));
        }
        if ds_names.contains(&d.name.as_str()) {
            out.push(diag(format!("{at}.name"), format!("duplicate dataset `{}`", d.name)));
        }
        let mut seen = HashSet::new();
        for (j, s) in d.sources.iter().enumerate() {
            if f.source(s).is_none() {
                out.push(diag(format!("{at}.sources[{j}]"), format!("unknown source `{s}`")));
            }
            if !seen.insert(s.as_str()) {
                out.push(diag(format!("{at}.sources[{j}]"), format!("source `{s}` listed twice")));
            }
        }
        if let Some(t) = &d.trim_source {
            if !d.sources.contains(t) {
                out.push(diag(format!("{at}.trim_source"), format!("`{t}` is not among the dataset's sources")));
            }
        }
        if d.budget_tokens.is_some() && d.match_budget.is_some() {
            out.push(diag(format!("{at}.match_budget"), "conflicts with budget_tokens"));
        }
        if let Some(m) = &d.match_budget {
            if !ds_names.contains(&m.as_str()) {
                out.push(diag(format!("{at}.match_budget"), format!("`{m}` is not an earlier dataset")));
            }
        }
        if (d.budget_tokens.is_some() || d.match_budget.is_some()) && d.trim_source.is_none() {
            out.push(diag(format!("{at}.trim_source"), "required when a budget is set"));
        }
        ds_names.push(&d.name);
    }
    out
}
