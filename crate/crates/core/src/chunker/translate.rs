//! The boundary to an external machine-translation system.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::chunk::Chunk;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatorSpec {
    pub name: String,
    pub beam_size: usize,
    pub max_context: usize,
}

impl Default for TranslatorSpec {
    fn default() -> Self {
        Self {
            name: "identity".into(),
            beam_size: 1,
            max_context: 156,
        }
    }
}

pub trait Translator {
    fn spec(&self) -> &TranslatorSpec;

    fn translate(&self, text: &str) -> Result<String, String>;

    /// Translates several texts; the default calls `translate` per text.
    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, String>> {
        texts.iter().map(|t| self.translate(t)).collect()
    }
}

/// Returns its input; stands in for a real model in tests and dry runs.
#[derive(Debug, Default)]
pub struct IdentityTranslator {
    spec: TranslatorSpec,
}

impl Translator for IdentityTranslator {
    fn spec(&self) -> &TranslatorSpec {
        &self.spec
    }

    fn translate(&self, text: &str) -> Result<String, String> {
        Ok(text.to_string())
    }
}

/// Runs an external command once per batch: one chunk per line on stdin, one
/// translation per line on stdout. Missing output lines count as failures.
#[derive(Debug)]
pub struct SubprocessTranslator {
    spec: TranslatorSpec,
    program: String,
    args: Vec<String>,
}

impl SubprocessTranslator {
    pub fn new(spec: TranslatorSpec, argv: &[String]) -> Result<Self, String> {
        let (program, args) = argv.split_first().ok_or("empty translator command")?;
        Ok(Self {
            spec,
            program: program.clone(),
            args: args.to_vec(),
        })
    }

    fn run(&self, texts: &[String]) -> Result<Vec<String>, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start `{}`: {e}", self.program))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input: String = texts.iter().map(|t| format!("{}\n", t.replace('\n', " "))).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let stdout = child.stdout.take().expect("piped stdout");
        let lines: Vec<String> = BufReader::new(stdout)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| format!("reading translator output: {e}"))?;
        let status = child.wait().map_err(|e| e.to_string())?;
        let _ = writer.join();
        if !status.success() {
            return Err(format!("`{}` exited with {status}", self.program));
        }
        Ok(lines)
    }
}

impl Translator for SubprocessTranslator {
    fn spec(&self) -> &TranslatorSpec {
        &self.spec
    }

    fn translate(&self, text: &str) -> Result<String, String> {
        self.translate_batch(&[text.to_string()]).remove(0)
    }

    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, String>> {
        match self.run(texts) {
            Ok(lines) => (0..texts.len())
                .map(|i| lines.get(i).cloned().ok_or_else(|| format!("no output line for chunk {i}")))
                .collect(),
            Err(e) => texts.iter().map(|_| Err(e.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationFailure {
    pub doc_id: String,
    pub chunk_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct TranslationOutcome {
    /// One entry per input chunk, in order.
    pub results: Vec<(Chunk, Result<String, String>)>,
}

impl TranslationOutcome {
    pub fn successes(&self) -> usize {
        self.results.iter().filter(|(_, r)| r.is_ok()).count()
    }

    pub fn failures(&self) -> Vec<TranslationFailure> {
        self.results
            .iter()
            .filter_map(|(c, r)| {
                r.as_ref().err().map(|e| TranslationFailure {
                    doc_id: c.doc_id.clone(),
                    chunk_index: c.index,
                    error: e.clone(),
                })
            })
            .collect()
    }
}

pub fn translate_chunks(chunks: Vec<Chunk>, translator: &dyn Translator) -> TranslationOutcome {
    let texts: Vec<String> = chunks.iter().map(Chunk::text).collect();
    let translated = translator.translate_batch(&texts);
    debug_assert_eq!(translated.len(), chunks.len());
    TranslationOutcome {
        results: chunks.into_iter().zip(translated).collect(),
    }
}
