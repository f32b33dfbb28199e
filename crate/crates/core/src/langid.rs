//! Language identification with a linear softmax over hashed character
//! n-grams.
//!
//! Text is lowercased and whitespace-normalized; every word is wrapped in `<`
//! and `>` and contributes its character 3- to 5-grams. Each n-gram is hashed
//! with FNV-1a into one of `buckets` feature slots. The document vector is the
//! average of its one-hot n-gram features, and the classifier is a single
//! linear layer followed by softmax, trained with SGD over a seeded shuffle.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::CorpusShard;
use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::rng::SplitMix64;

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5;
pub const DEFAULT_BUCKETS: usize = 1 << 18;

const MAGIC: &[u8; 4] = b"KLID";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LangScore {
    pub label: String,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub buckets: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 0.5,
            buckets: DEFAULT_BUCKETS,
            seed: 0,
        }
    }
}

/// Hashed n-gram slots of `text`, one entry per n-gram occurrence.
pub fn extract_features(text: &str, buckets: usize) -> Vec<u32> {
    let lowered = text.to_lowercase();
    let mut feats = Vec::new();
    let mut wrapped = String::new();
    for word in lowered.split_whitespace() {
        wrapped.clear();
        wrapped.push('<');
        wrapped.push_str(word);
        wrapped.push('>');
        let bounds: Vec<usize> = wrapped
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(wrapped.len()))
            .collect();
        let nchars = bounds.len() - 1;
        for n in MIN_N..=MAX_N {
            for start in 0..nchars.saturating_sub(n - 1) {
                let gram = &wrapped[bounds[start]..bounds[start + n]];
                feats.push((fnv1a64(gram.as_bytes()) % buckets as u64) as u32);
            }
        }
    }
    feats
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangIdModel {
    labels: Vec<String>,
    buckets: usize,
    // bucket-major: weights[bucket * labels + label]
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LangIdModel {
    fn zeroed(labels: Vec<String>, buckets: usize) -> Self {
        let n = labels.len();
        Self {
            weights: vec![0.0; buckets * n],
            bias: vec![0.0; n],
            labels,
            buckets,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn weight(&self, label: usize, bucket: usize) -> f64 {
        self.weights[bucket * self.labels.len() + label]
    }

    pub fn bias(&self, label: usize) -> f64 {
        self.bias[label]
    }

    fn logits(&self, feats: &[u32], out: &mut [f64]) {
        let n = self.labels.len();
        out.copy_from_slice(&self.bias);
        let inv = 1.0 / feats.len() as f64;
        let mut acc = vec![0.0; n];
        for &f in feats {
            let row = &self.weights[f as usize * n..(f as usize + 1) * n];
            for (a, w) in acc.iter_mut().zip(row) {
                *a += w;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a * inv;
        }
    }

    fn softmax_in_place(v: &mut [f64]) {
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in v.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in v.iter_mut() {
            *x /= sum;
        }
    }

    fn probabilities_of(&self, feats: &[u32]) -> Vec<f64> {
        let mut p = vec![0.0; self.labels.len()];
        self.logits(feats, &mut p);
        Self::softmax_in_place(&mut p);
        p
    }

    /// Softmax distribution over `labels()`.
    pub fn probabilities(&self, text: &str) -> Result<Vec<f64>> {
        let feats = extract_features(text, self.buckets);
        if feats.is_empty() {
            return Err(Error::Unscorable("no character n-grams in text".into()));
        }
        Ok(self.probabilities_of(&feats))
    }

    /// Top label and its probability; ties go to the earlier label.
    pub fn score(&self, text: &str) -> Result<LangScore> {
        let p = self.probabilities(text)?;
        let mut best = 0;
        for (i, &x) in p.iter().enumerate() {
            if x > p[best] {
                best = i;
            }
        }
        Ok(LangScore {
            label: self.labels[best].clone(),
            prob: p[best],
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.labels.len() as u32).to_le_bytes())?;
        for l in &self.labels {
            w.write_all(&(l.len() as u32).to_le_bytes())?;
            w.write_all(l.as_bytes())?;
        }
        w.write_all(&(MIN_N as u32).to_le_bytes())?;
        w.write_all(&(MAX_N as u32).to_le_bytes())?;
        w.write_all(&(self.buckets as u32).to_le_bytes())?;
        for b in &self.bias {
            w.write_all(&b.to_le_bytes())?;
        }
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r).map_err(|e| match e {
            ReadError::Io(e) => Error::io(path, e),
            ReadError::Format(m) => Error::Integrity(format!("{}: {m}", path.display())),
        })
    }

    fn read_from(r: &mut impl Read) -> std::result::Result<Self, ReadError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ReadError::Format("not a language-id model".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(ReadError::Format(format!("unsupported model version {version}")));
        }
        let n = read_u32(r)? as usize;
        if n < 2 {
            return Err(ReadError::Format("model needs at least two labels".into()));
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            labels.push(
                String::from_utf8(buf).map_err(|_| ReadError::Format("label is not UTF-8".into()))?,
            );
        }
        let (min_n, max_n) = (read_u32(r)? as usize, read_u32(r)? as usize);
        if (min_n, max_n) != (MIN_N, MAX_N) {
            return Err(ReadError::Format(format!("unsupported n-gram range {min_n}..={max_n}")));
        }
        let buckets = read_u32(r)? as usize;
        if buckets == 0 {
            return Err(ReadError::Format("zero feature buckets".into()));
        }
        let mut model = LangIdModel::zeroed(labels, buckets);
        for b in model.bias.iter_mut() {
            *b = read_f64(r)?;
        }
        for x in model.weights.iter_mut() {
            *x = read_f64(r)?;
        }
        if model.weights.iter().chain(&model.bias).any(|x| !x.is_finite()) {
            return Err(ReadError::Format("non-finite weight".into()));
        }
        Ok(model)
    }
}

enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Mean cross-entropy per epoch, measured before each example's update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epoch_loss: Vec<f64>,
}

/// Trains on one shard per language. Examples are put into a canonical order
/// (label, text, id) before the seeded shuffle, so the result does not depend
/// on the order documents were supplied in.
pub fn train_langid(
    corpora: &BTreeMap<String, CorpusShard>,
    opts: &TrainOptions,
) -> Result<(LangIdModel, TrainingLog)> {
    if corpora.len() < 2 {
        return Err(Error::Config(format!(
            "language identification needs at least 2 languages, got {}",
            corpora.len()
        )));
    }
    if opts.buckets == 0 || opts.buckets > u32::MAX as usize {
        return Err(Error::Config(format!("invalid bucket count {}", opts.buckets)));
    }
    if !(opts.learning_rate.is_finite() && opts.learning_rate > 0.0) {
        return Err(Error::Config(format!("invalid learning rate {}", opts.learning_rate)));
    }

    let labels: Vec<String> = corpora.keys().cloned().collect();
    let mut keyed: Vec<(usize, &str, &str)> = Vec::new();
    for (li, shard) in corpora.values().enumerate() {
        let before = keyed.len();
        for d in shard.documents() {
            keyed.push((li, d.text.as_str(), d.id.as_str()));
        }
        if keyed.len() == before {
            return Err(Error::Config(format!("language `{}` has no documents", labels[li])));
        }
    }
    keyed.sort_unstable();

    let mut examples: Vec<(usize, Vec<u32>)> = keyed
        .par_iter()
        .map(|&(li, text, _)| (li, extract_features(text, opts.buckets)))
        .collect();
    examples.retain(|(_, f)| !f.is_empty());
    for (li, label) in labels.iter().enumerate() {
        if !examples.iter().any(|(l, _)| *l == li) {
            return Err(Error::Config(format!(
                "language `{label}` has no scorable documents"
            )));
        }
    }

    let mut model = LangIdModel::zeroed(labels, opts.buckets);
    let nl = model.labels.len();
    let mut rng = SplitMix64::new(opts.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let total_steps = (opts.epochs * examples.len()).max(1) as f64;
    let mut step = 0usize;
    let mut probs = vec![0.0; nl];
    let mut log = TrainingLog {
        epoch_loss: Vec::with_capacity(opts.epochs),
    };

    for _ in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut loss = 0.0;
        for &ei in &order {
            let (target, feats) = &examples[ei];
            // linear decay, as in fastText
            let lr = opts.learning_rate * (1.0 - step as f64 / total_steps);
            step += 1;

            model.logits(feats, &mut probs);
            LangIdModel::softmax_in_place(&mut probs);
            loss -= probs[*target].max(f64::MIN_POSITIVE).ln();

            for (k, p) in probs.iter_mut().enumerate() {
                *p -= if k == *target { 1.0 } else { 0.0 };
            }
            // normalized step: the averaged logit moves by about lr * g
            // whatever the text length
            let scale = lr;
            for (b, g) in model.bias.iter_mut().zip(&probs) {
                *b -= lr * g;
            }
            for &f in feats {
                let row = &mut model.weights[f as usize * nl..(f as usize + 1) * nl];
                for (w, g) in row.iter_mut().zip(&probs) {
                    *w -= scale * g;
                }
            }
        }
        log.epoch_loss.push(loss / examples.len() as f64);
    }
    Ok((model, log))
}

/// Keeps documents whose top label is `target` with probability at least
/// `threshold`. Unscorable documents are dropped.
pub fn filter_language(
    model: &LangIdModel,
    shard: &CorpusShard,
    target: &str,
    threshold: f64,
) -> CorpusShard {
    let keep: Vec<bool> = shard
        .documents()
        .par_iter()
        .map(|d| match model.score(&d.text) {
            Ok(s) => s.label == target && s.prob >= threshold,
            Err(_) => false,
        })
        .collect();
    let mut it = keep.into_iter();
    shard.retain(|_| it.next().unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Domain};

    fn shard(label: &str, texts: &[&str]) -> CorpusShard {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("{label}{i}"), label, Domain::Informal, *t))
            .collect();
        CorpusShard::new(label, docs).unwrap()
    }

    fn small_opts() -> TrainOptions {
        TrainOptions {
            buckets: 1 << 12,
            epochs: 10,
            ..Default::default()
        }
    }

    #[test]
    fn feature_count_matches_ngram_arithmetic() {
        // "<ab>" has 4 chars: two 3-grams, one 4-gram, no 5-gram
        assert_eq!(extract_features("AB", 1 << 10).len(), 3);
        // "<a>" yields exactly one 3-gram
        assert_eq!(extract_features("a", 1 << 10).len(), 1);
        assert!(extract_features("   ", 1 << 10).is_empty());
        assert_eq!(extract_features("Straße", 64), extract_features("  straße ", 64));
    }

    #[test]
    fn needs_two_languages() {
        let mut c = BTreeMap::new();
        c.insert("de".to_string(), shard("de", &["hallo"]));
        assert!(matches!(train_langid(&c, &small_opts()), Err(Error::Config(_))));
    }

    #[test]
    fn separable_alphabets() {
        let mut c = BTreeMap::new();
        c.insert("el".to_string(), shard("el", &["αβγδ εζηθ"]));
        c.insert("la".to_string(), shard("la", &["abcd efgh"]));
        let (m, _) = train_langid(&c, &small_opts()).unwrap();
        assert_eq!(m.score("αβγδ εζηθ").unwrap().label, "el");
        assert_eq!(m.score("abcd efgh").unwrap().label, "la");
    }

    #[test]
    fn empty_text_is_unscorable() {
        let mut c = BTreeMap::new();
        c.insert("a".to_string(), shard("a", &["xxx"]));
        c.insert("b".to_string(), shard("b", &["yyy"]));
        let (m, _) = train_langid(&c, &small_opts()).unwrap();
        assert!(matches!(m.score(""), Err(Error::Unscorable(_))));
        let p = m.probabilities("zzz").unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn save_load_round_trip() {
        let mut c = BTreeMap::new();
        c.insert("a".to_string(), shard("a", &["xxx yy"]));
        c.insert("b".to_string(), shard("b", &["qqq rr"]));
        let (m, _) = train_langid(&c, &small_opts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        assert_eq!(LangIdModel::load(&p).unwrap(), m);
        std::fs::write(&p, b"nope").unwrap();
        assert!(LangIdModel::load(&p).is_err());
    }
}
