//! Cleaning applied to informal web text before language identification:
//! HTML entity unescaping, URL removal, then a minimum-length filter.

use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusShard, Document};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub input_docs: u64,
    pub unescaped_docs: u64,
    pub urls_removed: u64,
    pub dropped_short: u64,
    pub output_docs: u64,
}

impl CleanStats {
    pub fn merge(&mut self, other: &CleanStats) {
        self.input_docs += other.input_docs;
        self.unescaped_docs += other.unescaped_docs;
        self.urls_removed += other.urls_removed;
        self.dropped_short += other.dropped_short;
        self.output_docs += other.output_docs;
    }
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        _ => return None,
    })
}

fn numeric_entity(body: &str) -> Option<char> {
    let code = if let Some(hex) = body.strip_prefix('x').or_else(|| body.strip_prefix('X')) {
        if hex.is_empty() || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        u32::from_str_radix(hex, 16).ok()?
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        body.parse::<u32>().ok()?
    };
    if code == 0 {
        return None;
    }
    char::from_u32(code)
}

fn unescape_once(text: &str) -> Option<String> {
    if !text.contains('&') {
        return None;
    }
    let mut out = String::with_capacity(text.len());
    let mut changed = false;
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp + 1..];
        // entity bodies are short; a missing or distant `;` means literal `&`
        let decoded = tail.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let body = &tail[..semi];
            let ch = match body.strip_prefix('#') {
                Some(num) => numeric_entity(num),
                None => named_entity(body),
            };
            ch.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &tail[semi + 1..];
                changed = true;
            }
            None => {
                out.push('&');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    changed.then_some(out)
}

/// Replaces the named entities `amp lt gt quot apos nbsp` and decimal or hex
/// numeric references with their characters. Decoding repeats until no entity
/// remains, so double-escaped input (`&amp;lt;`) ends up fully decoded and the
/// function is idempotent. Malformed references are left as they are.
pub fn unescape_html(text: &str) -> String {
    let mut current = match unescape_once(text) {
        Some(s) => s,
        None => return text.to_string(),
    };
    // each decode shortens the string, so this terminates
    while let Some(next) = unescape_once(&current) {
        current = next;
    }
    current
}

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:(?:https?|ftp)://|www\.)\S*").unwrap());

/// Deletes `http://`, `https://`, `ftp://` and bare `www.` URLs up to the next
/// whitespace. The whitespace around each removed URL collapses to one space,
/// or to nothing at the start or end of the text.
pub fn strip_urls(text: &str) -> (String, usize) {
    let mut pieces = Vec::new();
    let mut last = 0;
    for m in URL_RE.find_iter(text) {
        let piece = &text[last..m.start()];
        pieces.push(if last == 0 { piece.trim_end() } else { piece.trim() });
        last = m.end();
    }
    if pieces.is_empty() {
        return (text.to_string(), 0);
    }
    let count = pieces.len();
    pieces.push(text[last..].trim_start());
    let mut out = String::with_capacity(text.len());
    for piece in pieces.into_iter().filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(piece);
    }
    (out, count)
}

/// Drops documents with fewer than `min_words` whitespace tokens.
pub fn filter_short(shard: &CorpusShard, min_words: usize) -> (CorpusShard, CleanStats) {
    let out = shard.retain(|d| d.token_count() >= min_words);
    let stats = CleanStats {
        input_docs: shard.len() as u64,
        dropped_short: (shard.len() - out.len()) as u64,
        output_docs: out.len() as u64,
        ..Default::default()
    };
    (out, stats)
}

struct Cleaned {
    doc: Document,
    unescaped: bool,
    urls: usize,
}

fn clean_document(doc: &Document) -> Cleaned {
    let unescaped = unescape_html(&doc.text);
    let was_unescaped = unescaped != doc.text;
    let (stripped, urls) = strip_urls(&unescaped);
    Cleaned {
        doc: doc.with_text(stripped),
        unescaped: was_unescaped,
        urls,
    }
}

/// unescape, strip URLs, then drop short documents (length measured after
/// cleaning).
pub fn clean_shard(shard: &CorpusShard, min_words: usize) -> Result<(CorpusShard, CleanStats)> {
    let cleaned: Vec<Cleaned> = shard.documents().par_iter().map(clean_document).collect();
    let mut stats = CleanStats {
        input_docs: shard.len() as u64,
        ..Default::default()
    };
    let mut docs = Vec::with_capacity(cleaned.len());
    for c in cleaned {
        stats.unescaped_docs += c.unescaped as u64;
        stats.urls_removed += c.urls as u64;
        docs.push(c.doc);
    }
    let cleaned = CorpusShard::new(shard.source(), docs)?;
    let (out, filtered) = filter_short(&cleaned, min_words);
    stats.dropped_short = filtered.dropped_short;
    stats.output_docs = filtered.output_docs;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;
    use crate::rng::SplitMix64;
    use crate::tokenize::token_count;
    use proptest::prelude::*;

    #[test]
    fn named_entities() {
        assert_eq!(unescape_html("Besuch &amp; Co"), "Besuch & Co");
        assert_eq!(unescape_html("kein Entity"), "kein Entity");
        assert_eq!(
            unescape_html("&lt;b&gt; &quot;x&quot; &apos;y&apos;&nbsp;z"),
            "<b> \"x\" 'y'\u{a0}z"
        );
    }

    #[test]
    fn numeric_entities_against_table() {
        // code points taken from the Unicode charts, independent of the decoder
        let table: &[(&str, char)] = &[
            ("&#x41;", 'A'),
            ("&#66;", 'B'),
            ("&#xE4;", 'ä'),
            ("&#228;", 'ä'),
            ("&#X20AC;", '€'),
            ("&#8364;", '€'),
            ("&#x1F600;", '😀'),
        ];
        for (input, ch) in table {
            assert_eq!(unescape_html(input), ch.to_string(), "{input}");
        }
        assert_eq!(unescape_html("&#x41;&#66;"), "AB");
    }

    #[test]
    fn malformed_entities_pass_through() {
        for s in [
            "AT&T",
            "&unknown;",
            "&#;",
            "&#x;",
            "&#xZZ;",
            "&#0;",
            "&#xD800;",
            "&#1114112;",
            "&amp",
            "& amp;",
            "&",
        ] {
            assert_eq!(unescape_html(s), s);
        }
    }

    #[test]
    fn double_escaped_decodes_fully() {
        assert_eq!(unescape_html("&amp;gt; zitat"), "> zitat");
        assert_eq!(unescape_html("&amp;amp;amp;"), "&");
    }

    #[test]
    fn strips_single_url() {
        assert_eq!(
            strip_urls("siehe https://example.de heute"),
            ("siehe heute".to_string(), 1)
        );
        assert_eq!(strip_urls("kein Link"), ("kein Link".to_string(), 0));
    }

    #[test]
    fn strips_urls_at_edges_and_schemes() {
        assert_eq!(strip_urls("www.a.de hallo"), ("hallo".to_string(), 1));
        assert_eq!(strip_urls("hallo  ftp://x/y"), ("hallo".to_string(), 1));
        assert_eq!(
            strip_urls("a HTTP://X.de  \n b www.c.org c"),
            ("a b c".to_string(), 2)
        );
        assert_eq!(strip_urls("http://only"), (String::new(), 1));
        // other schemes are left alone
        assert_eq!(strip_urls("mailto:x@y.de").1, 0);
    }

    /// Reference scan: a URL runs to the next whitespace, so the number of
    /// removals is the number of whitespace tokens containing a URL prefix.
    fn reference_url_count(text: &str) -> usize {
        text.split_whitespace()
            .filter(|tok| {
                let t = tok.to_ascii_lowercase();
                ["http://", "https://", "ftp://", "www."]
                    .iter()
                    .any(|p| t.contains(p))
            })
            .count()
    }

    #[test]
    fn planted_urls_match_reference_scan() {
        let mut rng = SplitMix64::new(50);
        let words = ["Haus", "und", "www", "http", "Stadt", "https:", "wie", "Wetter"];
        let urls = ["https://a.de/x?y=1", "http://b.com", "www.c.org/d", "ftp://e.net", "WWW.F.DE"];
        for _ in 0..50 {
            let mut parts = Vec::new();
            let n = 5 + rng.below(30) as usize;
            let mut planted = 0;
            for _ in 0..n {
                if rng.below(5) == 0 {
                    let u = urls[rng.below(urls.len() as u64) as usize];
                    // sometimes glue the URL onto a word
                    if rng.below(3) == 0 {
                        parts.push(format!("({u}"));
                    } else {
                        parts.push(u.to_string());
                    }
                    planted += 1;
                } else {
                    parts.push(words[rng.below(words.len() as u64) as usize].to_string());
                }
            }
            let text = parts.join(if rng.below(2) == 0 { " " } else { "  " });
            let (out, count) = strip_urls(&text);
            assert_eq!(count, reference_url_count(&text), "{text}");
            assert_eq!(count, planted);
            assert_eq!(reference_url_count(&out), 0);
        }
    }

    fn shard_of(texts: &[&str]) -> CorpusShard {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("r{i}"), "reddit", Domain::Informal, *t))
            .collect();
        CorpusShard::new("reddit", docs).unwrap()
    }

    #[test]
    fn nineteen_words_dropped_at_twenty() {
        let nineteen = vec!["wort"; 19].join(" ");
        let twenty = vec!["wort"; 20].join(" ");
        let shard = shard_of(&[&nineteen, &twenty]);
        let (out, stats) = filter_short(&shard, 20);
        assert_eq!(out.len(), 1);
        assert_eq!(out.documents()[0].id, "r1");
        assert_eq!(stats.dropped_short, 1);
        assert_eq!(stats.output_docs, stats.input_docs - stats.dropped_short);
    }

    #[test]
    fn zero_threshold_is_identity() {
        let shard = shard_of(&["", "a", "a b c"]);
        let (out, stats) = filter_short(&shard, 0);
        assert_eq!(out, shard);
        assert_eq!(stats.dropped_short, 0);
    }

    #[test]
    fn random_shard_matches_brute_force() {
        let mut rng = SplitMix64::new(11);
        let texts: Vec<String> = (0..200)
            .map(|_| vec!["w"; rng.below(40) as usize].join(if rng.below(2) == 0 { " " } else { "\t " }))
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let shard = shard_of(&refs);
        for min in [0, 1, 10, 20, 39, 40] {
            let (out, _) = filter_short(&shard, min);
            let expected: Vec<String> = texts
                .iter()
                .enumerate()
                .filter(|(_, t)| t.split([' ', '\t']).filter(|w| !w.is_empty()).count() >= min)
                .map(|(i, _)| format!("r{i}"))
                .collect();
            let got: Vec<String> = out.documents().iter().map(|d| d.id.clone()).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn urls_do_not_count_toward_minimum() {
        let text = format!("{} https://x.de", vec!["wort"; 19].join(" "));
        let shard = shard_of(&[&text]);
        let (out, stats) = clean_shard(&shard, 20).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.urls_removed, 1);
        assert_eq!(stats.dropped_short, 1);
    }

    #[test]
    fn clean_shard_keeps_labels() {
        let long = format!("&quot;{}&quot; www.x.de", vec!["wort"; 25].join(" "));
        let shard = shard_of(&[&long, "kurz"]);
        let (out, stats) = clean_shard(&shard, 20).unwrap();
        assert_eq!(
            stats,
            CleanStats {
                input_docs: 2,
                unescaped_docs: 1,
                urls_removed: 1,
                dropped_short: 1,
                output_docs: 1
            }
        );
        let d = &out.documents()[0];
        assert_eq!((d.id.as_str(), d.source.as_str(), d.domain), ("r0", "reddit", Domain::Informal));
        assert!(d.text.starts_with("\"wort"));
        assert_eq!(d.token_count(), token_count(&d.text));
    }

    proptest! {
        #[test]
        fn unescape_idempotent(s in "([a-z ]|&(amp|lt|gt|quot|apos|nbsp|#[0-9]{1,4}|#x[0-9a-fA-F]{1,4}|bogus);?|&)*") {
            let once = unescape_html(&s);
            prop_assert_eq!(unescape_html(&once), once);
        }

        #[test]
        fn strip_idempotent(s in "([a-zw. :/]|https?://|www\\.|ftp://|\\s)*") {
            let (once, _) = strip_urls(&s);
            let (twice, n) = strip_urls(&once);
            prop_assert_eq!(n, 0);
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn filter_monotone(lens in proptest::collection::vec(0usize..30, 0..40), t in 0usize..30) {
            let texts: Vec<String> = lens.iter().map(|&n| vec!["x"; n].join(" ")).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let shard = shard_of(&refs);
            let (lo, _) = filter_short(&shard, t);
            let (hi, _) = filter_short(&shard, t + 1);
            let lo_ids: std::collections::HashSet<_> = lo.documents().iter().map(|d| d.id.clone()).collect();
            prop_assert!(hi.documents().iter().all(|d| lo_ids.contains(&d.id)));
        }
    }
}
