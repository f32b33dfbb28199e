//! Reference implementations and generators shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use korpus::rng::SplitMix64;
use korpus::{CorpusShard, Document, Domain};

/// For every document, the length of the longest token run it shares with
/// some other position of the corpus. Quadratic: walks every diagonal of the
/// self-comparison matrix of the concatenated stream.
pub fn longest_shared_run(docs: &[Vec<&str>]) -> Vec<usize> {
    let mut ids: HashMap<&str, u64> = HashMap::new();
    let mut stream: Vec<u64> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (di, doc) in docs.iter().enumerate() {
        for t in doc {
            let next = ids.len() as u64;
            stream.push(*ids.entry(t).or_insert(next));
            owner.push(di);
        }
        // a separator equal to nothing else
        stream.push(u64::MAX - di as u64);
        owner.push(usize::MAX);
    }
    let n = stream.len();
    let mut best = vec![0usize; docs.len()];
    for d in 1..n {
        let mut run = 0usize;
        for p in 0..n - d {
            let q = p + d;
            if owner[p] != usize::MAX && stream[p] == stream[q] {
                run += 1;
                let (a, b) = (owner[p], owner[q]);
                if run > best[a] {
                    best[a] = run;
                }
                if run > best[b] {
                    best[b] = run;
                }
            } else {
                run = 0;
            }
        }
    }
    best
}

/// Ids of documents that share a run of at least `min_match` tokens.
pub fn flagged_by_oracle(shards: &[CorpusShard], min_match: usize) -> BTreeSet<String> {
    let docs: Vec<&Document> = shards.iter().flat_map(|s| s.documents()).collect();
    let tokens: Vec<Vec<&str>> = docs.iter().map(|d| d.text.split_whitespace().collect()).collect();
    let best = longest_shared_run(&tokens);
    docs.iter()
        .zip(best)
        .filter(|(_, b)| *b >= min_match)
        .map(|(d, _)| d.id.clone())
        .collect()
}

pub fn shard_of(source: &str, texts: impl IntoIterator<Item = String>) -> CorpusShard {
    let docs = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("{source}-{i:05}"), source, Domain::Formal, t))
        .collect();
    CorpusShard::new(source, docs).unwrap()
}

/// A random corpus over `vocab` words with copied passages planted between
/// documents, at most `max_tokens` tokens in total.
pub fn random_corpus(rng: &mut SplitMix64, max_tokens: usize, vocab: u64) -> Vec<Vec<String>> {
    let n_docs = 2 + rng.below(40) as usize;
    let mut docs: Vec<Vec<String>> = Vec::new();
    let mut total = 0;
    for _ in 0..n_docs {
        let len = 1 + rng.below(400) as usize;
        if total + len > max_tokens {
            break;
        }
        total += len;
        docs.push((0..len).map(|_| format!("w{}", rng.below(vocab))).collect());
    }
    if docs.len() < 2 {
        return docs;
    }
    for _ in 0..rng.below(8) {
        let src = rng.below(docs.len() as u64) as usize;
        let dst = rng.below(docs.len() as u64) as usize;
        let len = 2 + rng.below(30) as usize;
        if docs[src].len() < len || docs[dst].len() < len {
            continue;
        }
        let from = rng.below((docs[src].len() - len + 1) as u64) as usize;
        let to = rng.below((docs[dst].len() - len + 1) as u64) as usize;
        let passage: Vec<String> = docs[src][from..from + len].to_vec();
        docs[dst][to..to + len].clone_from_slice(&passage);
    }
    docs
}

pub fn corpus_shard(source: &str, docs: &[Vec<String>]) -> CorpusShard {
    shard_of(source, docs.iter().map(|d| d.join(" ")))
}

const GERMAN: &[&str] = &[
    "der", "die", "das", "und", "ist", "nicht", "ein", "eine", "mit", "auf", "für", "sich", "auch", "dem", "werden",
    "noch", "nach", "über", "zwischen", "wurde", "Straße", "Gesundheit", "Entscheidung", "Bürger", "Gericht",
    "Verhandlung", "gegenüber", "schließlich", "Zeitung", "Wirtschaft", "Krankenhaus", "Behandlung", "Ärztin",
    "Patienten", "Untersuchung", "möglich", "täglich", "wichtig", "schnell", "wenig", "Jahrhundert", "Geschichte",
    "Sprache", "Wissenschaft", "Forschung", "Ergebnisse", "zeigen", "gemeinsam", "Bundesregierung", "Gesetz",
    "Kläger", "Beklagte", "Urteil", "Mädchen", "Häuser", "weiß", "grüßen", "fröhlich", "natürlich", "Bäckerei",
];

const ENGLISH: &[&str] = &[
    "the", "and", "is", "not", "with", "for", "this", "that", "have", "from", "would", "their", "which", "there",
    "through", "thought", "although", "government", "decision", "people", "court", "hearing", "newspaper", "economy",
    "hospital", "treatment", "doctor", "patients", "examination", "possible", "daily", "important", "quickly",
    "little", "century", "history", "language", "science", "research", "results", "show", "together", "policy",
    "law", "plaintiff", "defendant", "judgment", "girl", "houses", "knows", "greeting", "happy", "naturally",
    "bakery", "weather", "children", "should", "because", "while", "where",
];

fn sentence(rng: &mut SplitMix64, words: &[&str]) -> String {
    let n = 6 + rng.below(9) as usize;
    let mut out: Vec<&str> = (0..n).map(|_| words[rng.below(words.len() as u64) as usize]).collect();
    let mut chars = out.remove(0).chars();
    let mut s: String = chars.next().into_iter().flat_map(char::to_uppercase).chain(chars).collect();
    for w in out {
        s.push(' ');
        s.push_str(w);
    }
    s.push('.');
    s
}

pub fn german_sentence(rng: &mut SplitMix64) -> String {
    sentence(rng, GERMAN)
}

pub fn english_sentence(rng: &mut SplitMix64) -> String {
    sentence(rng, ENGLISH)
}

/// A sparse first-order Markov chain over `vocab` words: every word has three
/// successors. Text from it has strong word-order structure.
pub struct MarkovText {
    successors: Vec<[usize; 3]>,
}

impl MarkovText {
    pub fn new(seed: u64, vocab: usize) -> Self {
        let mut rng = SplitMix64::new(seed);
        let successors = (0..vocab)
            .map(|_| [0; 3].map(|_| rng.below(vocab as u64) as usize))
            .collect();
        MarkovText { successors }
    }

    pub fn document(&self, rng: &mut SplitMix64, len: usize) -> Vec<String> {
        let mut w = rng.below(self.successors.len() as u64) as usize;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(format!("t{w}"));
            w = self.successors[w][rng.below(3) as usize];
        }
        out
    }
}

/// Toy corpus for the order-2 hand oracle.
pub const KN_TOY: [&str; 4] = ["d b", "c d d", "b b d d d", "d d"];

/// Unigram probabilities of the toy corpus as exact fractions: continuation
/// counts with discounts (1/3, 1, 5/3), interpolated with the uniform
/// distribution over the five predictable words.
pub const KN_TOY_UNIGRAM: [(&str, f64); 5] = [
    ("<unk>", 7.0 / 75.0),
    ("</s>", 29.0 / 150.0),
    ("b", 17.0 / 75.0),
    ("c", 4.0 / 25.0),
    ("d", 49.0 / 150.0),
];

/// Bigram probabilities of the toy corpus; bigram discounts are (7/9, 0, 0)
/// after clamping.
pub const KN_TOY_BIGRAM: [(&str, &str, f64); 20] = [
    ("<s>", "<unk>", 49.0 / 1350.0),
    ("<s>", "</s>", 203.0 / 2700.0),
    ("<s>", "b", 97.0 / 675.0),
    ("<s>", "c", 53.0 / 450.0),
    ("<s>", "d", 1693.0 / 2700.0),
    ("b", "<unk>", 49.0 / 675.0),
    ("b", "</s>", 101.0 / 450.0),
    ("b", "b", 169.0 / 675.0),
    ("b", "c", 28.0 / 225.0),
    ("b", "d", 443.0 / 1350.0),
    ("c", "<unk>", 49.0 / 675.0),
    ("c", "</s>", 203.0 / 1350.0),
    ("c", "b", 119.0 / 675.0),
    ("c", "c", 28.0 / 225.0),
    ("c", "d", 643.0 / 1350.0),
    ("d", "<unk>", 49.0 / 5400.0),
    ("d", "</s>", 4253.0 / 10800.0),
    ("d", "b", 269.0 / 5400.0),
    ("d", "c", 7.0 / 450.0),
    ("d", "d", 5743.0 / 10800.0),
];
