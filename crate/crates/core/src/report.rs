//! Duplicate ratios, composition tables and their JSON/Markdown rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusShard, Domain};
use crate::dedup::DedupReport;
use crate::error::{Error, Result};

/// `duplicate_tokens / input_tokens`.
pub fn duplicate_ratio(report: &DedupReport) -> Result<f64> {
    ratio(report.duplicate_tokens, report.input_tokens)
        .ok_or_else(|| Error::Integrity(format!("dedup report `{}` has zero input tokens", report.stage)))
}

fn ratio(part: u64, whole: u64) -> Option<f64> {
    (whole > 0).then(|| part as f64 / whole as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionRow {
    pub domain: Domain,
    pub source: String,
    pub doc_count: u64,
    pub token_count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Totals {
    pub doc_count: u64,
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionReport {
    pub dataset: String,
    pub rows: Vec<CompositionRow>,
    pub totals: Totals,
}

impl CompositionReport {
    /// Builds a report from raw `(domain, source, docs, tokens)` counts.
    /// Rows are ordered by domain, then source; shares are token shares.
    pub fn from_counts(dataset: &str, counts: impl IntoIterator<Item = (Domain, String, u64, u64)>) -> Self {
        let mut rows: Vec<CompositionRow> = counts
            .into_iter()
            .map(|(domain, source, doc_count, token_count)| CompositionRow {
                domain,
                source,
                doc_count,
                token_count,
                share: 0.0,
            })
            .collect();
        rows.sort_by(|a, b| (a.domain, &a.source).cmp(&(b.domain, &b.source)));
        let totals = Totals {
            doc_count: rows.iter().map(|r| r.doc_count).sum(),
            token_count: rows.iter().map(|r| r.token_count).sum(),
        };
        for r in &mut rows {
            r.share = ratio(r.token_count, totals.token_count).unwrap_or(0.0);
        }
        CompositionReport {
            dataset: dataset.to_string(),
            rows,
            totals,
        }
    }

    /// One row per shard, labelled with its source name.
    pub fn from_shards<'a>(dataset: &str, shards: impl IntoIterator<Item = (Domain, &'a CorpusShard)>) -> Self {
        Self::from_counts(
            dataset,
            shards
                .into_iter()
                .map(|(d, s)| (d, s.source().to_string(), s.len() as u64, s.token_count())),
        )
    }

    /// Recomputes totals and shares from the row counts and compares.
    pub fn check(&self) -> Result<()> {
        let fresh = Self::from_counts(
            &self.dataset,
            self.rows
                .iter()
                .map(|r| (r.domain, r.source.clone(), r.doc_count, r.token_count)),
        );
        if fresh.totals != self.totals {
            return Err(Error::Integrity(format!(
                "composition totals {:?} differ from column sums {:?}",
                self.totals, fresh.totals
            )));
        }
        let mut mine: Vec<&CompositionRow> = self.rows.iter().collect();
        mine.sort_by(|a, b| (a.domain, &a.source).cmp(&(b.domain, &b.source)));
        for (a, b) in mine.iter().zip(&fresh.rows) {
            if (a.share - b.share).abs() > 1e-9 {
                return Err(Error::Integrity(format!(
                    "share of `{}` is {} but counts give {}",
                    a.source, a.share, b.share
                )));
            }
        }
        Ok(())
    }

    pub fn domain_totals(&self) -> Vec<(Domain, Totals)> {
        let mut out: Vec<(Domain, Totals)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(d, _)| *d == r.domain) {
                Some((_, t)) => {
                    t.doc_count += r.doc_count;
                    t.token_count += r.token_count;
                }
                None => out.push((
                    r.domain,
                    Totals {
                        doc_count: r.doc_count,
                        token_count: r.token_count,
                    },
                )),
            }
        }
        out.sort_by_key(|(d, _)| *d);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Any report the pipeline writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Composition(CompositionReport),
    Dedup(DedupReport),
    DedupStages(Vec<DedupReport>),
}

impl Report {
    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<report>".into(),
            line: e.line(),
            message: format!("not a composition or dedup report: {e}"),
        })?;
        if let Report::Composition(c) = &report {
            c.check()?;
        }
        Ok(report)
    }
}

fn billions(tokens: u64) -> String {
    format!("{:.1}B", tokens as f64 / 1e9)
}

fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Markdown => match report {
            Report::Composition(c) => composition_markdown(c),
            Report::Dedup(d) => dedup_markdown(std::slice::from_ref(d)),
            Report::DedupStages(ds) => dedup_markdown(ds),
        },
    }
}

fn composition_markdown(c: &CompositionReport) -> String {
    let mut out = String::new();
    writeln!(out, "### Dataset `{}`\n", c.dataset).unwrap();
    out.push_str("| Domain | Source | Documents | Tokens | Tokens (B) | Share |\n");
    out.push_str("|---|---|---:|---:|---:|---:|\n");
    for r in &c.rows {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            r.domain,
            r.source,
            r.doc_count,
            r.token_count,
            billions(r.token_count),
            percent(r.share)
        )
        .unwrap();
    }
    let share = if c.rows.is_empty() || c.totals.token_count == 0 { 0.0 } else { 1.0 };
    writeln!(
        out,
        "| **Total** | | {} | {} | {} | {} |",
        c.totals.doc_count,
        c.totals.token_count,
        billions(c.totals.token_count),
        percent(share)
    )
    .unwrap();
    out
}

fn dedup_markdown(reports: &[DedupReport]) -> String {
    let mut out = String::new();
    out.push_str("| Stage | Documents | Tokens | Tokens (B) | Duplicate tokens | Duplicate (B) | Ratio | Removed docs | Removed tokens |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in reports {
        let ratio = duplicate_ratio(r).map(|x| format!("{x:.4}")).unwrap_or_else(|_| "n/a".into());
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.stage,
            r.input_docs,
            r.input_tokens,
            billions(r.input_tokens),
            r.duplicate_tokens,
            billions(r.duplicate_tokens),
            ratio,
            r.removed_docs,
            r.removed_tokens
        )
        .unwrap();
    }
    out
}
