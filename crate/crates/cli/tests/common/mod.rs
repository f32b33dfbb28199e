#![allow(dead_code)]

#[path = "../../../core/tests/oracle/mod.rs"]
pub mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use korpus::rng::SplitMix64;
use korpus::{write_shard, CorpusShard, Document, Domain};
use oracle::{english_sentence, german_sentence};

fn paragraph(rng: &mut SplitMix64, english: bool) -> String {
    let n = 3 + rng.below(5) as usize;
    (0..n)
        .map(|_| if english { english_sentence(rng) } else { german_sentence(rng) })
        .collect::<Vec<_>>()
        .join(" ")
}

fn passage(rng: &mut SplitMix64, len: usize) -> String {
    let mut words = Vec::new();
    while words.len() < len {
        words.extend(german_sentence(rng).split_whitespace().map(str::to_string));
    }
    words.truncate(len);
    words.join(" ")
}

fn save(dir: &Path, rel: &str, source: &str, domain: Domain, texts: Vec<String>) {
    let docs = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("{source}-{i:04}"), source, domain, t))
        .collect();
    let path = dir.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_shard(&CorpusShard::new(source, docs).unwrap(), path).unwrap();
}

/// Writes a small multi-source corpus and a config exercising every stage.
/// Returns the config path.
pub fn write_fixture(dir: &Path) -> PathBuf {
    let mut rng = SplitMix64::new(2024);
    let shared_gc4 = passage(&mut rng, 60);
    let shared_news = passage(&mut rng, 60);

    let mut gc4: Vec<String> = (0..70).map(|_| paragraph(&mut rng, false)).collect();
    for i in [3, 17, 41, 55, 62] {
        gc4[i] = paragraph(&mut rng, true);
    }
    for i in [8, 26, 49] {
        gc4[i] = "Zu kurz für das Korpus.".into();
    }
    gc4[5] = format!("{} Mehr unter https://example.org/a?b=1 &amp; www.beispiel.de heute.", gc4[5]);
    gc4[10] = format!("{} {shared_gc4}", gc4[10]);
    gc4[20] = format!("{shared_gc4} {}", gc4[20]);
    gc4[30] = format!("{} {shared_news} {}", gc4[30], german_sentence(&mut rng));
    let (a, b) = gc4.split_at(35);
    let a: Vec<String> = a.to_vec();
    let b: Vec<String> = b.to_vec();
    save_split(dir, "data/gc4/part-0.jsonl", "data/gc4/part-1.jsonl", a, b);

    let mut news: Vec<String> = (0..15).map(|_| paragraph(&mut rng, false)).collect();
    news[3] = format!("{shared_news} {}", news[3]);
    save(dir, "data/news/news.jsonl", "news", Domain::Formal, news);

    let wiki: Vec<String> = (0..40).map(|_| paragraph(&mut rng, false)).collect();
    save(dir, "data/wiki/wiki.jsonl", "wiki", Domain::Formal, wiki);

    let med: Vec<String> = (0..6).map(|_| paragraph(&mut rng, true)).collect();
    save(dir, "data/medical/med.jsonl", "medical", Domain::Medical, med);
    let legal: Vec<String> = (0..6).map(|_| paragraph(&mut rng, false)).collect();
    save(dir, "data/legal/legal.jsonl", "legal", Domain::Legal, legal);

    let de: Vec<String> = (0..150).map(|_| german_sentence(&mut rng)).collect();
    let en: Vec<String> = (0..150).map(|_| english_sentence(&mut rng)).collect();
    save(dir, "data/langid/de.jsonl", "de", Domain::Informal, de);
    save(dir, "data/langid/en.jsonl", "en", Domain::Informal, en);

    let config = serde_json::json!({
        "settings": {
            "min_match_tokens": 50,
            "min_words": 20,
            "ngram_order": 3,
            "quality_top_k": 45,
            "chunk_budget_tokens": 128,
            "mix_seed": 7,
            "langid_threshold": 0.9
        },
        "sources": [
            {"name": "gc4", "domain": "formal", "shards": ["data/gc4/*.jsonl"],
             "langid": true, "dedup_group": "gc4", "quality_filter": true},
            {"name": "news", "domain": "formal", "shards": ["data/news/*.jsonl"], "dedup_group": "news"},
            {"name": "wiki", "domain": "formal", "shards": ["data/wiki/*.jsonl"], "dedup_group": "wiki"},
            {"name": "medical", "domain": "medical", "shards": ["data/medical/*.jsonl"], "translate": true},
            {"name": "legal", "domain": "legal", "shards": ["data/legal/*.jsonl"]}
        ],
        "langid": {
            "target": "de",
            "training": {"de": ["data/langid/de.jsonl"], "en": ["data/langid/en.jsonl"]},
            "buckets": 16384,
            "seed": 3
        },
        "lm": {"train_sources": ["wiki"], "min_count": 1},
        "datasets": [
            {"name": "quality", "sources": ["gc4", "news", "wiki"]},
            {"name": "variety", "sources": ["gc4", "news", "wiki", "medical", "legal"],
             "match_budget": "quality", "trim_source": "gc4"}
        ]
    });
    let path = dir.join("pipeline.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn save_split(dir: &Path, first: &str, second: &str, a: Vec<String>, b: Vec<String>) {
    let offset = a.len();
    let mk = |texts: Vec<String>, start: usize| -> CorpusShard {
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("gc4-{:04}", start + i), "gc4", Domain::Formal, t))
            .collect();
        CorpusShard::new("gc4", docs).unwrap()
    };
    fs::create_dir_all(dir.join(first).parent().unwrap()).unwrap();
    write_shard(&mk(a, 0), dir.join(first)).unwrap();
    write_shard(&mk(b, offset), dir.join(second)).unwrap();
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
