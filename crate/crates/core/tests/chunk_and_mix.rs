mod oracle;

use korpus::chunker::{chunk_by_tokens, chunk_document, split_sentences};
use korpus::corpus::{read_shard, write_shard};
use korpus::mixer::{assemble, trim_to_budget, DatasetSpec, SourceSpec};
use korpus::rng::SplitMix64;
use korpus::{CorpusShard, Document, Domain};
use oracle::german_sentence;

#[test]
fn chunking_random_documents() {
    let mut rng = SplitMix64::new(8);
    for i in 0..200 {
        let n = 1 + rng.below(30) as usize;
        let mut text = (0..n).map(|_| german_sentence(&mut rng)).collect::<Vec<_>>().join(" ");
        if i % 10 == 0 {
            // one very long sentence
            text.push_str(&format!(" Lang{}", " wort".repeat(200)));
        }
        let doc = Document::new(format!("d{i}"), "s", Domain::Formal, text);
        let sentences = split_sentences(&doc.text);
        let chunks = chunk_document(&doc, 128);
        let flat: Vec<String> = chunks.iter().flat_map(|c| c.sentences.clone()).collect();
        assert_eq!(flat, sentences);
        for c in &chunks {
            assert!(c.oversized || c.token_count <= 128);
            assert!(!c.oversized || c.sentences.len() == 1);
        }
        let mut last = usize::MAX;
        for b in [16, 32, 64, 128, 256] {
            let n = chunk_by_tokens(&doc.id, &sentences, b).len();
            assert!(n <= last);
            last = n;
        }
    }
}

fn sized(source: &str, domain: Domain, sizes: &[usize]) -> CorpusShard {
    let docs = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| Document::new(format!("{source}{i}"), source, domain, vec!["x"; n].join(" ")))
        .collect();
    CorpusShard::new(source, docs).unwrap()
}

#[test]
fn assemble_from_files_with_matched_budget() {
    let dir = tempfile::tempdir().unwrap();
    let gc4 = sized("gc4", Domain::Formal, &[100; 10]);
    let med = sized("med", Domain::Medical, &[50, 50]);
    write_shard(&gc4, dir.path().join("gc4.jsonl")).unwrap();
    write_shard(&med, dir.path().join("med.jsonl")).unwrap();
    assert_eq!(read_shard(dir.path().join("gc4.jsonl")).unwrap(), gc4);

    let spec = DatasetSpec {
        name: "variety".into(),
        sources: vec![
            SourceSpec { name: "gc4".into(), domain: Domain::Formal, shards: vec![dir.path().join("gc4.jsonl")] },
            SourceSpec { name: "med".into(), domain: Domain::Medical, shards: vec![dir.path().join("med.jsonl")] },
        ],
        budget_tokens: Some(1000),
        trim_source: Some("gc4".into()),
        seed: 5,
    };
    let ds = assemble(&spec).unwrap();
    assert_eq!(ds.token_count(), 1000);
    assert_eq!(ds.shards[0].len(), 9);
    assert_eq!(ds.shards[1], med);
    assert_eq!(ds.report.totals.token_count, 1000);
    assert_eq!(assemble(&spec).unwrap(), ds);
}

#[test]
fn trimming_removes_four_of_ten() {
    let shards = vec![sized("gc4", Domain::Formal, &[100; 10])];
    for seed in 0..20 {
        let a = trim_to_budget(&shards, "gc4", 600, seed).unwrap();
        assert_eq!(a[0].len(), 6);
        assert_eq!(a[0].token_count(), 600);
        assert_eq!(a, trim_to_budget(&shards, "gc4", 600, seed).unwrap());
    }
}
