//! Corpus curation: cleaning, language filtering, exact-substring
//! deduplication, n-gram quality filtering, chunking for translation and
//! dataset assembly.

pub mod chunker;
pub mod config;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod hash;
pub mod langid;
pub mod mixer;
pub mod preprocess;
pub mod qualfilter;
pub mod report;
pub mod rng;
pub mod tokenize;

pub use config::{DedupPolicy, PipelineConfig};
pub use corpus::{read_shard, write_shard, CorpusShard, Document, Domain, Manifest};
pub use error::{Error, Result};
