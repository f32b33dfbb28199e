//! Stage-by-stage execution inside a workspace directory.
//!
//! Every stage writes into `<workspace>/<NN-stage>/`. Outputs are produced in
//! a `.partial` sibling directory that is renamed into place once complete,
//! then a `.done` marker records the stage fingerprint. A stage whose marker
//! matches the current fingerprint is skipped unless `force` is set.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use korpus::chunker::{
    chunk_document, translate_chunks, ChunkRecord, IdentityTranslator, SubprocessTranslator, Translator,
};
use korpus::dedup::{staged_dedup, DedupReport, StageGroup};
use korpus::hash::Fnv1a64;
use korpus::langid::{self, LangIdModel};
use korpus::mixer::{assemble_loaded, DatasetSpec, SourceSpec};
use korpus::preprocess::{clean_shard, CleanStats};
use korpus::qualfilter::{self, quality_filter, read_arpa, write_arpa, NgramModel};
use korpus::report::{render, CompositionReport, Format, Report};
use korpus::{read_shard, write_shard, CorpusShard, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{DatasetEntry, LoadedConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Preprocess,
    Langid,
    Dedup,
    Qualfilter,
    Chunk,
    Mix,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Preprocess,
        Stage::Langid,
        Stage::Dedup,
        Stage::Qualfilter,
        Stage::Chunk,
        Stage::Mix,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Langid => "langid",
            Stage::Dedup => "dedup",
            Stage::Qualfilter => "qualfilter",
            Stage::Chunk => "chunk",
            Stage::Mix => "mix",
            Stage::Report => "report",
        }
    }

    pub fn dir_name(self) -> String {
        format!("{:02}-{}", self as usize + 1, self.name())
    }

    fn previous(self) -> Option<Stage> {
        (self as usize).checked_sub(1).map(|i| Stage::ALL[i])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Stop once this stage has completed.
    pub stop_after: Option<Stage>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
    /// Set when the run stopped early because of `stop_after`.
    pub stopped_after: Option<Stage>,
    pub dedup_reports: Vec<DedupReport>,
    pub compositions: Vec<CompositionReport>,
}

const MARKER: &str = ".done";

struct Ctx<'a> {
    cfg: &'a LoadedConfig,
    workspace: &'a Path,
}

impl Ctx<'_> {
    fn dir(&self, stage: Stage) -> PathBuf {
        self.workspace.join(stage.dir_name())
    }

    fn source_names(&self) -> Vec<&str> {
        self.cfg.file.sources.iter().map(|s| s.name.as_str()).collect()
    }

    /// Reads the per-source shards written by `stage`.
    fn read_sources(&self, stage: Stage) -> Result<Vec<CorpusShard>> {
        let dir = self.dir(stage);
        self.source_names()
            .par_iter()
            .map(|n| read_shard(dir.join(format!("{n}.jsonl"))))
            .collect()
    }
}

fn stage_err(stage: Stage, e: Error) -> Error {
    match e {
        Error::Config(_) | Error::Integrity(_) | Error::Stage { .. } => e,
        other => Error::Stage {
            stage: stage.name().into(),
            message: other.to_string(),
        },
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).expect("serializable");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_sources(dir: &Path, shards: &[CorpusShard]) -> Result<()> {
    shards
        .par_iter()
        .try_for_each(|s| write_shard(s, dir.join(format!("{}.jsonl", s.source()))))
}

/// Fingerprint of the raw inputs: every input file's path and bytes.
fn input_fingerprint(cfg: &LoadedConfig) -> Result<u64> {
    let mut h = Fnv1a64::default();
    let f = &cfg.file;
    let mut patterns: Vec<&[String]> = f.sources.iter().map(|s| s.shards.as_slice()).collect();
    if let Some(l) = &f.langid {
        patterns.extend(l.training.values().map(Vec::as_slice));
    }
    let mut files = Vec::new();
    for p in patterns {
        files.extend(cfg.expand(p)?);
    }
    if let Some(m) = f.langid.as_ref().and_then(|l| l.model.as_ref()) {
        files.push(cfg.resolve(m));
    }
    if let Some(m) = f.lm.as_ref().and_then(|l| l.model.as_ref()) {
        files.push(cfg.resolve(m));
    }
    for path in files {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        h.update(path.to_string_lossy().as_bytes());
        h.update(&[0]);
        h.update(&(bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finish())
}

fn chain(prev: u64, stage: Stage, config_json: &str) -> u64 {
    let mut h = Fnv1a64::default();
    h.update(&prev.to_le_bytes());
    h.update(stage.name().as_bytes());
    h.update(config_json.as_bytes());
    h.finish()
}

fn is_done(dir: &Path, fingerprint: &str) -> bool {
    fs::read_to_string(dir.join(MARKER)).is_ok_and(|m| m.trim() == fingerprint)
}

fn remove_dir_if_exists(dir: &Path) -> Result<()> {
    match fs::remove_dir_all(dir) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(dir, e)),
    }
}

/// Runs the configured pipeline in `workspace`.
pub fn run_pipeline(cfg: &LoadedConfig, workspace: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    fs::create_dir_all(workspace).map_err(|e| Error::io(workspace, e))?;
    let ctx = Ctx { cfg, workspace };
    let config_json = serde_json::to_string(&cfg.file).expect("serializable");
    let mut fp = input_fingerprint(cfg)?;
    let mut outcome = RunOutcome::default();

    for stage in Stage::ALL {
        fp = chain(fp, stage, &config_json);
        let fingerprint = format!("{fp:016x}");
        let dir = ctx.dir(stage);
        if !opts.force && is_done(&dir, &fingerprint) {
            log::info!("{stage}: up to date");
            outcome.skipped.push(stage);
        } else {
            log::info!("{stage}: running");
            let partial = workspace.join(format!("{}.partial", stage.dir_name()));
            remove_dir_if_exists(&partial)?;
            fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
            run_stage(&ctx, stage, &partial).map_err(|e| stage_err(stage, e))?;
            remove_dir_if_exists(&dir)?;
            fs::rename(&partial, &dir).map_err(|e| Error::io(&dir, e))?;
            let marker = dir.join(MARKER);
            fs::write(&marker, format!("{fingerprint}\n")).map_err(|e| Error::io(&marker, e))?;
            outcome.executed.push(stage);
        }
        if opts.stop_after == Some(stage) && stage != Stage::Report {
            outcome.stopped_after = Some(stage);
            return Ok(outcome);
        }
    }

    let report_dir = ctx.dir(Stage::Report);
    let summary: Summary = read_json(&report_dir.join("report.json"))?;
    outcome.dedup_reports = summary.dedup;
    outcome.compositions = summary.datasets;
    Ok(outcome)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn run_stage(ctx: &Ctx, stage: Stage, out: &Path) -> Result<()> {
    match stage {
        Stage::Preprocess => preprocess(ctx, out),
        Stage::Langid => langid_stage(ctx, out),
        Stage::Dedup => dedup_stage(ctx, out),
        Stage::Qualfilter => qualfilter_stage(ctx, out),
        Stage::Chunk => chunk_stage(ctx, out),
        Stage::Mix => mix_stage(ctx, out),
        Stage::Report => report_stage(ctx, out),
    }
}

fn input(ctx: &Ctx, stage: Stage) -> Result<Vec<CorpusShard>> {
    ctx.read_sources(stage.previous().expect("stage has a predecessor"))
}

/// Reads and merges shard files into one shard named `name`.
fn load_merged(ctx: &Ctx, name: &str, patterns: &[String]) -> Result<CorpusShard> {
    let parts = ctx
        .cfg
        .expand(patterns)?
        .par_iter()
        .map(read_shard)
        .collect::<Result<Vec<_>>>()?;
    let docs = parts.into_iter().flat_map(CorpusShard::into_documents).collect();
    CorpusShard::new(name, docs)
}

#[derive(Serialize)]
struct SourceStats<T> {
    source: String,
    #[serde(flatten)]
    stats: T,
}

fn preprocess(ctx: &Ctx, out: &Path) -> Result<()> {
    let min_words = ctx.cfg.file.settings.min_words;
    let results: Vec<(CorpusShard, Option<CleanStats>)> = ctx
        .cfg
        .file
        .sources
        .par_iter()
        .map(|s| {
            let shard = load_merged(ctx, &s.name, &s.shards)?;
            if let Some(d) = shard.documents().iter().find(|d| d.domain != s.domain) {
                return Err(Error::Integrity(format!(
                    "document `{}` has domain {} but source `{}` is declared {}",
                    d.id, d.domain, s.name, s.domain
                )));
            }
            if s.preprocess {
                clean_shard(&shard, min_words).map(|(c, st)| (c, Some(st)))
            } else {
                Ok((shard, None))
            }
        })
        .collect::<Result<_>>()?;
    let stats: Vec<SourceStats<CleanStats>> = results
        .iter()
        .filter_map(|(s, st)| {
            st.clone().map(|stats| SourceStats {
                source: s.source().into(),
                stats,
            })
        })
        .collect();
    let shards: Vec<CorpusShard> = results.into_iter().map(|(s, _)| s).collect();
    write_sources(out, &shards)?;
    write_json(&out.join("stats.json"), &stats)
}

#[derive(Serialize)]
struct KeptStats {
    input_docs: usize,
    kept_docs: usize,
}

fn langid_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let file = &ctx.cfg.file;
    let shards = input(ctx, Stage::Langid)?;
    if !file.sources.iter().any(|s| s.langid) {
        write_sources(out, &shards)?;
        return write_json(&out.join("stats.json"), &Vec::<()>::new());
    }
    let section = file.langid.as_ref().expect("validated");
    let model = match &section.model {
        Some(m) => LangIdModel::load(ctx.cfg.resolve(m))?,
        None => {
            let corpora = section
                .training
                .iter()
                .map(|(lang, globs)| Ok((lang.clone(), load_merged(ctx, lang, globs)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let opts = langid::TrainOptions {
                epochs: section.epochs,
                learning_rate: section.learning_rate,
                buckets: section.buckets,
                seed: section.seed,
            };
            let (model, log) = langid::train_langid(&corpora, &opts)?;
            log::info!("langid: final epoch loss {:?}", log.epoch_loss.last());
            model.save(out.join("langid.bin"))?;
            model
        }
    };
    if !model.labels().contains(&section.target) {
        return Err(Error::Config(format!(
            "langid target `{}` is not a model label ({:?})",
            section.target,
            model.labels()
        )));
    }
    let threshold = file.settings.langid_threshold;
    let mut stats = Vec::new();
    let filtered: Vec<CorpusShard> = shards
        .into_iter()
        .zip(&file.sources)
        .map(|(shard, src)| {
            if !src.langid {
                return shard;
            }
            let kept = langid::filter_language(&model, &shard, &section.target, threshold);
            stats.push(SourceStats {
                source: src.name.clone(),
                stats: KeptStats {
                    input_docs: shard.len(),
                    kept_docs: kept.len(),
                },
            });
            kept
        })
        .collect();
    write_sources(out, &filtered)?;
    write_json(&out.join("stats.json"), &stats)
}

fn dedup_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let file = &ctx.cfg.file;
    let mut shards: Vec<Option<CorpusShard>> = input(ctx, Stage::Dedup)?.into_iter().map(Some).collect();

    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, src) in file.sources.iter().enumerate() {
        if let Some(g) = &src.dedup_group {
            match groups.iter_mut().find(|(n, _)| n == g) {
                Some((_, members)) => members.push(i),
                None => groups.push((g.clone(), vec![i])),
            }
        }
    }
    let stage_groups: Vec<StageGroup> = groups
        .iter()
        .map(|(name, members)| StageGroup {
            name: name.clone(),
            shards: members.iter().map(|&i| shards[i].take().expect("one group per source")).collect(),
        })
        .collect();
    let staged = staged_dedup(
        stage_groups,
        file.settings.min_match_tokens,
        file.settings.dedup_policy,
    )?;
    for ((_, members), g) in groups.iter().zip(staged.groups) {
        for (&i, s) in members.iter().zip(g.shards) {
            shards[i] = Some(s);
        }
    }
    let shards: Vec<CorpusShard> = shards.into_iter().map(|s| s.expect("every source present")).collect();
    write_sources(out, &shards)?;
    write_json(&out.join("dedup_report.json"), &staged.reports)
}

#[derive(Serialize)]
struct QualityStats {
    scored_docs: usize,
    kept_docs: usize,
    top_k: usize,
}

fn qualfilter_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let file = &ctx.cfg.file;
    let shards = input(ctx, Stage::Qualfilter)?;
    let flagged: Vec<usize> = (0..shards.len()).filter(|&i| file.sources[i].quality_filter).collect();
    if flagged.is_empty() {
        write_sources(out, &shards)?;
        return write_json(&out.join("stats.json"), &serde_json::Value::Null);
    }
    let section = file.lm.as_ref().expect("validated");
    let model: NgramModel = match &section.model {
        Some(m) => read_arpa(ctx.cfg.resolve(m))?,
        None => {
            let reference: Vec<CorpusShard> = section
                .train_sources
                .iter()
                .map(|n| {
                    let i = file.sources.iter().position(|s| &s.name == n).expect("validated");
                    shards[i].clone()
                })
                .collect();
            let opts = qualfilter::TrainOptions {
                order: file.settings.ngram_order,
                min_count: section.min_count,
            };
            let model = qualfilter::train_ngram(&reference, &opts)?;
            write_arpa(&model, out.join("lm.arpa"))?;
            model
        }
    };
    let candidates: Vec<CorpusShard> = flagged.iter().map(|&i| shards[i].clone()).collect();
    let (kept, scores) = quality_filter(&model, &candidates, file.settings.quality_top_k);
    let stats = QualityStats {
        scored_docs: scores.len(),
        kept_docs: kept.iter().map(CorpusShard::len).sum(),
        top_k: file.settings.quality_top_k,
    };
    let mut shards = shards;
    for (&i, s) in flagged.iter().zip(kept) {
        shards[i] = s;
    }
    write_sources(out, &shards)?;
    write_jsonl(&out.join("scores.jsonl"), &scores)?;
    write_json(&out.join("stats.json"), &stats)
}

#[derive(Serialize)]
struct ChunkStats {
    documents: usize,
    chunks: usize,
    oversized: usize,
    translated_docs: usize,
    failed_chunks: usize,
}

fn chunk_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let file = &ctx.cfg.file;
    let shards = input(ctx, Stage::Chunk)?;
    let budget = file.settings.chunk_budget_tokens;
    let translator: Box<dyn Translator> = match &file.translator {
        Some(t) if !t.command.is_empty() => {
            Box::new(SubprocessTranslator::new(t.spec(), &t.command).map_err(Error::Config)?)
        }
        _ => Box::new(IdentityTranslator::default()),
    };

    let mut stats = Vec::new();
    let mut failures = Vec::new();
    let mut result = Vec::with_capacity(shards.len());
    for (shard, src) in shards.into_iter().zip(&file.sources) {
        if !src.translate {
            result.push(shard);
            continue;
        }
        let chunks: Vec<_> = shard.documents().par_iter().flat_map(|d| chunk_document(d, budget)).collect();
        write_jsonl(
            &out.join(format!("{}.chunks.jsonl", src.name)),
            chunks.iter().map(ChunkRecord::from),
        )?;
        let n_chunks = chunks.len();
        let oversized = chunks.iter().filter(|c| c.oversized).count();
        let outcome = translate_chunks(chunks, translator.as_ref());

        // reassemble per document; a document with any failed chunk is dropped
        let mut per_doc: BTreeMap<&str, (bool, Vec<&str>)> = BTreeMap::new();
        for (c, r) in &outcome.results {
            let entry = per_doc.entry(c.doc_id.as_str()).or_insert((true, Vec::new()));
            match r {
                Ok(t) => entry.1.push(t),
                Err(_) => entry.0 = false,
            }
        }
        let docs: Vec<_> = shard
            .documents()
            .iter()
            .filter_map(|d| match per_doc.get(d.id.as_str()) {
                Some((true, parts)) => Some(d.with_text(parts.join(" "))),
                _ => None,
            })
            .collect();
        let failed = outcome.failures();
        stats.push(SourceStats {
            source: src.name.clone(),
            stats: ChunkStats {
                documents: shard.len(),
                chunks: n_chunks,
                oversized,
                translated_docs: docs.len(),
                failed_chunks: failed.len(),
            },
        });
        failures.extend(failed);
        result.push(CorpusShard::new(src.name.clone(), docs)?);
    }
    if !failures.is_empty() {
        log::warn!("chunk: {} chunks failed to translate", failures.len());
    }
    write_sources(out, &result)?;
    write_json(&out.join("stats.json"), &stats)?;
    write_json(&out.join("failures.json"), &failures)
}

fn dataset_spec(ctx: &Ctx, d: &DatasetEntry, budget: Option<u64>) -> DatasetSpec {
    let file = &ctx.cfg.file;
    DatasetSpec {
        name: d.name.clone(),
        sources: d
            .sources
            .iter()
            .map(|n| SourceSpec {
                name: n.clone(),
                domain: file.source(n).expect("validated").domain,
                shards: vec![],
            })
            .collect(),
        budget_tokens: budget,
        trim_source: d.trim_source.clone(),
        seed: d.seed.unwrap_or(file.settings.mix_seed),
    }
}

fn mix_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let shards = input(ctx, Stage::Mix)?;
    let by_name: BTreeMap<&str, &CorpusShard> = shards.iter().map(|s| (s.source(), s)).collect();
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    let mut compositions = Vec::new();
    for d in ctx.cfg.file.effective_datasets() {
        let budget = match (&d.budget_tokens, &d.match_budget) {
            (Some(b), _) => Some(*b),
            (None, Some(m)) => Some(totals[m]),
            (None, None) => None,
        };
        let spec = dataset_spec(ctx, &d, budget);
        let loaded = d.sources.iter().map(|n| vec![by_name[n.as_str()].clone()]).collect();
        let ds = assemble_loaded(&spec, loaded)?;
        let dir = out.join(&d.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_sources(&dir, &ds.shards)?;
        write_json(&dir.join("composition.json"), &ds.report)?;
        totals.insert(d.name.clone(), ds.token_count());
        compositions.push(ds.report);
    }
    write_json(&out.join("compositions.json"), &compositions)
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct Summary {
    dedup: Vec<DedupReport>,
    datasets: Vec<CompositionReport>,
}

fn report_stage(ctx: &Ctx, out: &Path) -> Result<()> {
    let dedup: Vec<DedupReport> = read_json(&ctx.dir(Stage::Dedup).join("dedup_report.json"))?;
    let datasets: Vec<CompositionReport> = read_json(&ctx.dir(Stage::Mix).join("compositions.json"))?;
    for c in &datasets {
        c.check()?;
    }
    let mut md = String::from("# Corpus report\n\n## Deduplication\n\n");
    if dedup.is_empty() {
        md.push_str("No deduplication groups configured.\n");
    } else {
        md.push_str(&render(&Report::DedupStages(dedup.clone()), Format::Markdown));
    }
    md.push_str("\n## Datasets\n");
    for c in &datasets {
        md.push('\n');
        md.push_str(&render(&Report::Composition(c.clone()), Format::Markdown));
    }
    fs::write(out.join("report.md"), md).map_err(|e| Error::io(out.join("report.md"), e))?;
    write_json(&out.join("report.json"), &Summary { dedup, datasets })
}
