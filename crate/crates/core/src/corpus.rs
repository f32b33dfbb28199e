//! Documents, shards and the JSONL shard file format.
//!
//! A shard file holds one JSON object per document followed by a single
//! manifest line:
//!
//! ```text
//! {"id":"d1","source":"gc4","domain":"formal","text":"..."}
//! {"__manifest__":true,"source":"gc4","doc_count":1,"token_count":3,"checksum":"..."}
//! ```
//!
//! The checksum is FNV-1a 64 over the concatenated document texts, written as
//! 16 lowercase hex digits.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::Fnv1a64;
use crate::tokenize::token_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Formal,
    Informal,
    Medical,
    Legal,
    Literature,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Formal,
        Domain::Informal,
        Domain::Medical,
        Domain::Legal,
        Domain::Literature,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Formal => "formal",
            Domain::Informal => "informal",
            Domain::Medical => "medical",
            Domain::Legal => "legal",
            Domain::Literature => "literature",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown domain `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub domain: Domain,
    pub text: String,
    token_count: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        domain: Domain,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            source: source.into(),
            domain,
            token_count: token_count(&text),
            text,
        }
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Same identity and labels, new text.
    pub fn with_text(&self, text: impl Into<String>) -> Self {
        Document::new(self.id.clone(), self.source.clone(), self.domain, text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub doc_count: u64,
    pub token_count: u64,
    pub checksum: String,
}

impl Manifest {
    fn compute(source: &str, documents: &[Document]) -> Self {
        let mut h = Fnv1a64::default();
        for d in documents {
            h.update(d.text.as_bytes());
        }
        Manifest {
            source: source.to_string(),
            doc_count: documents.len() as u64,
            token_count: documents.iter().map(|d| d.token_count as u64).sum(),
            checksum: format!("{:016x}", h.finish()),
        }
    }
}

/// An ordered, immutable run of documents plus its manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusShard {
    documents: Vec<Document>,
    manifest: Manifest,
}

impl CorpusShard {
    /// Builds a shard, rejecting duplicate document ids.
    pub fn new(source: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate document id `{}`", d.id)));
            }
        }
        let source = source.into();
        let manifest = Manifest::compute(&source, &documents);
        Ok(Self {
            documents,
            manifest,
        })
    }

    pub fn empty(source: impl Into<String>) -> Self {
        let source = source.into();
        Self {
            manifest: Manifest::compute(&source, &[]),
            documents: Vec::new(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn source(&self) -> &str {
        &self.manifest.source
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> u64 {
        self.manifest.token_count
    }

    /// Keeps the documents for which `keep` returns true, in order.
    pub fn retain(&self, mut keep: impl FnMut(&Document) -> bool) -> CorpusShard {
        let docs: Vec<Document> = self.documents.iter().filter(|d| keep(d)).cloned().collect();
        CorpusShard {
            manifest: Manifest::compute(&self.manifest.source, &docs),
            documents: docs,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    id: std::borrow::Cow<'a, str>,
    source: std::borrow::Cow<'a, str>,
    domain: Domain,
    text: std::borrow::Cow<'a, str>,
}

#[derive(Serialize)]
struct ManifestLine<'a> {
    #[serde(rename = "__manifest__")]
    marker: bool,
    #[serde(flatten)]
    manifest: &'a Manifest,
}

pub fn write_shard(shard: &CorpusShard, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_shard_to(shard, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_shard_to(shard: &CorpusShard, w: &mut impl Write) -> std::io::Result<()> {
    for d in &shard.documents {
        let rec = Record {
            id: d.id.as_str().into(),
            source: d.source.as_str().into(),
            domain: d.domain,
            text: d.text.as_str().into(),
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    let line = ManifestLine {
        marker: true,
        manifest: &shard.manifest,
    };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")
}

pub fn read_shard(path: impl AsRef<Path>) -> Result<CorpusShard> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_shard_from(BufReader::new(file), path)
}

pub fn read_shard_from(reader: impl BufRead, path: &Path) -> Result<CorpusShard> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut documents = Vec::new();
    let mut manifest: Option<(usize, Manifest)> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        if let Some((at, _)) = &manifest {
            return Err(parse_err(lineno, format!("record after manifest on line {at}")));
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if value.get("__manifest__").is_some() {
            let m: Manifest =
                serde_json::from_value(value).map_err(|e| parse_err(lineno, e.to_string()))?;
            manifest = Some((lineno, m));
            continue;
        }
        let rec: Record =
            serde_json::from_value(value).map_err(|e| parse_err(lineno, e.to_string()))?;
        documents.push(Document::new(rec.id, rec.source, rec.domain, rec.text));
    }

    let Some((_, stored)) = manifest else {
        return Err(Error::Integrity(format!("{}: missing manifest line", path.display())));
    };
    let shard = CorpusShard::new(stored.source.clone(), documents)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
    if shard.manifest != stored {
        return Err(Error::Integrity(format!(
            "{}: manifest mismatch (stored {:?}, recomputed {:?})",
            path.display(),
            stored,
            shard.manifest
        )));
    }
    Ok(shard)
}
