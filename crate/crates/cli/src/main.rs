use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use korpus::chunker::{chunk_document, ChunkRecord};
use korpus::dedup::{staged_dedup, StageGroup};
use korpus::langid::{self, LangIdModel, DEFAULT_BUCKETS};
use korpus::mixer::{assemble, DatasetSpec};
use korpus::preprocess::clean_shard;
use korpus::qualfilter::{self, quality_filter, read_arpa, score_shards, write_arpa};
use korpus::report::{render, Format, Report};
use korpus::{read_shard, write_shard, CorpusShard, DedupPolicy, Error, Result};
use korpus_cli::pipeline::{load_config, run_pipeline, validate_config, RunOptions, Stage};
use korpus_cli::{exit_code, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "korpus", version, about = "Corpus curation pipeline")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replace every configured seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Overwrite outputs and re-run completed pipeline stages.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unescape HTML, strip URLs and drop short documents.
    Preprocess {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        min_words: usize,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Language identification.
    #[command(subcommand)]
    Langid(LangidCommand),
    /// Exact-substring deduplication, per group and then across groups.
    Dedup {
        /// `name=<glob>`; repeat for staged deduplication.
        #[arg(long = "group", required = true)]
        groups: Vec<String>,
        #[arg(long, default_value_t = 100)]
        min_match: usize,
        #[arg(long, default_value = "remove-all")]
        policy: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// N-gram language model.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Keep the lowest-perplexity documents.
    QualityFilter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        top_k: usize,
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Split documents into sentence chunks for translation.
    Chunk {
        #[arg(long, default_value_t = 128)]
        budget: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble a dataset from a spec file.
    Mix {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render stage reports.
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
    /// Run every stage of a pipeline config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        stop_after: Option<String>,
    },
    /// Check a pipeline config and list its problems.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum LangidCommand {
    Train {
        /// `label=<glob>`, at least two.
        #[arg(long = "lang", required = true)]
        langs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: LangidTrainArgs,
    },
    Filter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LangidTrainArgs {
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    buckets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum LmCommand {
    Train {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<String>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in patterns {
        let mut matched: Vec<PathBuf> = glob::glob(p)
            .map_err(|e| Error::Config(format!("bad glob `{p}`: {e}")))?
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("glob `{p}`: {e}")))?;
        if matched.is_empty() {
            return Err(Error::Config(format!("`{p}` matches no files")));
        }
        matched.sort();
        out.extend(matched);
    }
    Ok(out)
}

fn read_all(patterns: &[String]) -> Result<Vec<(PathBuf, CorpusShard)>> {
    expand(patterns)?
        .into_iter()
        .map(|p| read_shard(&p).map(|s| (p, s)))
        .collect()
}

fn split_pair(arg: &str, flag: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(Error::Config(format!("--{flag} expects name=<glob>, got `{arg}`"))),
    }
}

struct Output {
    force: bool,
}

impl Output {
    fn check(&self, path: &Path) -> Result<()> {
        if !self.force && path.exists() {
            return Err(Error::Config(format!("{} exists; pass --force to overwrite", path.display())));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(())
    }

    fn shard(&self, shard: &CorpusShard, path: &Path) -> Result<()> {
        self.check(path)?;
        write_shard(shard, path)
    }

    fn text(&self, path: &Path, text: &str) -> Result<()> {
        self.check(path)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn json(&self, path: &Path, value: &impl serde::Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.text(path, &s)
    }

    fn jsonl<T: serde::Serialize>(&self, path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
        let mut s = String::new();
        for item in items {
            s.push_str(&serde_json::to_string(&item).expect("serializable"));
            s.push('\n');
        }
        self.text(path, &s)
    }
}

fn file_name(path: &Path) -> &std::ffi::OsStr {
    path.file_name().expect("shard paths name files")
}

fn run(cli: &Cli) -> Result<i32> {
    let out = Output { force: cli.force };
    match &cli.command {
        Command::Preprocess {
            inputs,
            out_dir,
            min_words,
            stats,
        } => {
            let mut all = Vec::new();
            for (path, shard) in read_all(inputs)? {
                let (cleaned, st) = clean_shard(&shard, *min_words)?;
                out.shard(&cleaned, &out_dir.join(file_name(&path)))?;
                all.push(serde_json::json!({ "input": path, "stats": st }));
            }
            if let Some(p) = stats {
                out.json(p, &all)?;
            }
        }
        Command::Langid(LangidCommand::Train { langs, out: model_path, opts }) => {
            let mut corpora = BTreeMap::new();
            for arg in langs {
                let (label, pattern) = split_pair(arg, "lang")?;
                let docs = read_all(&[pattern])?.into_iter().flat_map(|(_, s)| s.into_documents()).collect();
                corpora.insert(label.clone(), CorpusShard::new(label, docs)?);
            }
            let train = langid::TrainOptions {
                epochs: opts.epochs,
                learning_rate: opts.learning_rate,
                buckets: opts.buckets,
                seed: cli.seed_override.unwrap_or(opts.seed),
            };
            let (model, log) = langid::train_langid(&corpora, &train)?;
            log::info!("epoch loss: {:?}", log.epoch_loss);
            out.check(model_path)?;
            model.save(model_path)?;
        }
        Command::Langid(LangidCommand::Filter {
            model,
            target,
            threshold,
            input,
            out: path,
        }) => {
            if !(0.0..=1.0).contains(threshold) {
                return Err(Error::Config(format!("threshold must be within [0, 1], got {threshold}")));
            }
            let model = LangIdModel::load(model)?;
            if !model.labels().contains(target) {
                return Err(Error::Config(format!("`{target}` is not a model label")));
            }
            let shard = read_shard(input)?;
            let kept = langid::filter_language(&model, &shard, target, *threshold);
            log::info!("kept {} of {} documents", kept.len(), shard.len());
            out.shard(&kept, path)?;
        }
        Command::Dedup {
            groups,
            min_match,
            policy,
            out_dir,
            report,
        } => {
            let policy: DedupPolicy = policy.parse()?;
            let mut stage_groups = Vec::new();
            let mut names = Vec::new();
            for arg in groups {
                let (name, pattern) = split_pair(arg, "group")?;
                let (paths, shards): (Vec<_>, Vec<_>) = read_all(&[pattern])?.into_iter().unzip();
                names.push(paths);
                stage_groups.push(StageGroup { name, shards });
            }
            let staged = staged_dedup(stage_groups, *min_match, policy)?;
            for (g, paths) in staged.groups.iter().zip(&names) {
                for (s, p) in g.shards.iter().zip(paths) {
                    out.shard(s, &out_dir.join(&g.name).join(file_name(p)))?;
                }
            }
            for r in &staged.reports {
                log::info!(
                    "{}: {} of {} tokens duplicated, {} documents removed",
                    r.stage,
                    r.duplicate_tokens,
                    r.input_tokens,
                    r.removed_docs
                );
            }
            if let Some(p) = report {
                out.json(p, &staged.reports)?;
            }
        }
        Command::Lm(LmCommand::Train {
            inputs,
            order,
            min_count,
            out: path,
        }) => {
            let shards: Vec<CorpusShard> = read_all(inputs)?.into_iter().map(|(_, s)| s).collect();
            let opts = qualfilter::TrainOptions {
                order: *order,
                min_count: *min_count,
            };
            let model = qualfilter::train_ngram(&shards, &opts)?;
            out.check(path)?;
            write_arpa(&model, path)?;
        }
        Command::Lm(LmCommand::Score { model, inputs, out: path }) => {
            let model = read_arpa(model)?;
            let shards: Vec<CorpusShard> = read_all(inputs)?.into_iter().map(|(_, s)| s).collect();
            out.jsonl(path, score_shards(&model, &shards))?;
        }
        Command::QualityFilter {
            model,
            top_k,
            inputs,
            out_dir,
            scores,
        } => {
            if *top_k == 0 {
                return Err(Error::Config("--top-k must be positive".into()));
            }
            let model = read_arpa(model)?;
            let (paths, shards): (Vec<_>, Vec<_>) = read_all(inputs)?.into_iter().unzip();
            let (kept, all_scores) = quality_filter(&model, &shards, *top_k);
            for (s, p) in kept.iter().zip(&paths) {
                out.shard(s, &out_dir.join(file_name(p)))?;
            }
            if let Some(p) = scores {
                out.jsonl(p, &all_scores)?;
            }
        }
        Command::Chunk { budget, input, out: path } => {
            if *budget == 0 {
                return Err(Error::Config("--budget must be positive".into()));
            }
            let shard = read_shard(input)?;
            let records: Vec<ChunkRecord> = shard
                .documents()
                .iter()
                .flat_map(|d| chunk_document(d, *budget))
                .map(|c| ChunkRecord::from(&c))
                .collect();
            out.jsonl(path, &records)?;
        }
        Command::Mix {
            spec: spec_file,
            out_dir,
            report,
        } => {
            let mut spec = DatasetSpec::from_json_file(spec_file).map_err(unreadable_config)?;
            if let Some(seed) = cli.seed_override {
                spec.seed = seed;
            }
            let base = spec_dir(spec_file);
            for s in &mut spec.sources {
                s.shards = s.shards.iter().map(|p| base.join(p)).collect();
            }
            let ds = assemble(&spec)?;
            for s in &ds.shards {
                out.shard(s, &out_dir.join(format!("{}.jsonl", s.source())))?;
            }
            match report {
                Some(p) => out.json(p, &ds.report)?,
                None => print!("{}", render(&Report::Composition(ds.report), Format::Markdown)),
            }
        }
        Command::Report { inputs, format } => {
            let format: Format = format.parse()?;
            let mut rendered = Vec::new();
            for p in inputs {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let report = Report::from_json(&text).map_err(|e| match e {
                    Error::Parse { line, message, .. } => Error::Parse {
                        path: p.clone(),
                        line,
                        message,
                    },
                    other => other,
                })?;
                rendered.push(render(&report, format));
            }
            print!("{}", rendered.join("\n"));
        }
        Command::Pipeline {
            config,
            workspace,
            stop_after,
        } => {
            let cfg = load_config(config, cli.seed_override).map_err(unreadable_config)?;
            let opts = RunOptions {
                force: cli.force,
                stop_after: stop_after.as_deref().map(str::parse::<Stage>).transpose()?,
            };
            let outcome = run_pipeline(&cfg, workspace, &opts)?;
            let names = |v: &[Stage]| v.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ");
            log::info!("executed: [{}]; up to date: [{}]", names(&outcome.executed), names(&outcome.skipped));
            if let Some(s) = outcome.stopped_after {
                log::info!("stopped after {s}");
            }
        }
        Command::Validate { config } => {
            let diags = validate_config(config).map_err(unreadable_config)?;
            if diags.is_empty() {
                println!("{}: ok", config.display());
            } else {
                for d in &diags {
                    println!("{d}");
                }
                return Ok(EXIT_CONFIG);
            }
        }
    }
    Ok(EXIT_OK)
}

/// A config that cannot be read is a config error, not a stage failure.
fn unreadable_config(e: Error) -> Error {
    match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    }
}

/// Relative shard paths in a spec resolve against the spec's directory.
fn spec_dir(spec: &Path) -> PathBuf {
    match spec.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
