//! Declarative pipeline: a JSON config drives every stage in a fixed order.

mod config;
mod run;

pub use config::{
    load_config, validate_config, DatasetEntry, Diagnostic, LangIdSection, LmSection, LoadedConfig, PipelineFile,
    SourceEntry, TranslatorSection,
};
pub use run::{run_pipeline, RunOptions, RunOutcome, Stage};
