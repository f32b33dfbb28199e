//! ARPA text serialization. Probabilities and backoff weights are stored as
//! log10 values; zero probabilities (context-only entries such as `<s>`) are
//! written as -99.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ngram::{Entry, NgramModel, BOS, BOS_ID, EOS, EOS_ID, UNK, UNK_ID};
use crate::error::{Error, Result};

const LOG_ZERO: f64 = -99.0;

fn to_log10(p: f64) -> f64 {
    if p <= 0.0 {
        LOG_ZERO
    } else {
        p.log10()
    }
}

fn from_log10(x: f64) -> f64 {
    if x <= LOG_ZERO {
        0.0
    } else {
        10f64.powf(x)
    }
}

pub fn to_arpa(model: &NgramModel) -> String {
    let mut out = String::new();
    out.push_str("\\data\\\n");
    for (k, t) in model.tables.iter().enumerate() {
        let _ = writeln!(out, "ngram {}={}", k + 1, t.len());
    }
    for k in 1..=model.order {
        let _ = write!(out, "\n\\{k}-grams:\n");
        for (words, e) in model.sorted_entries(k) {
            let _ = write!(out, "{}\t{}", to_log10(e.prob), words.join(" "));
            if let Some(bow) = e.backoff {
                let _ = write!(out, "\t{}", to_log10(bow));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn write_arpa(model: &NgramModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_arpa(model)).map_err(|e| Error::io(path, e))
}

pub fn read_arpa(path: impl AsRef<Path>) -> Result<NgramModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arpa(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

type RawEntry<'a> = (Vec<&'a str>, f64, Option<f64>);

pub fn parse_arpa(text: &str) -> ParseResult<NgramModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    // header text before \data\ is allowed and ignored
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => return Err((0, "missing \\data\\ section".into())),
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (no, line) in lines.by_ref() {
        if line.is_empty() {
            if declared.is_empty() {
                continue;
            }
            break;
        }
        let Some(rest) = line.strip_prefix("ngram ") else {
            pending = Some((no, line));
            break;
        };
        let (k, n) = rest
            .split_once('=')
            .ok_or((no, format!("malformed count line `{line}`")))?;
        let k: usize = k.trim().parse().map_err(|_| (no, format!("bad order in `{line}`")))?;
        let n: usize = n.trim().parse().map_err(|_| (no, format!("bad count in `{line}`")))?;
        if k != declared.len() + 1 {
            return Err((no, format!("expected ngram {}, found ngram {k}", declared.len() + 1)));
        }
        declared.push(n);
    }
    if declared.is_empty() {
        return Err((0, "no ngram counts declared".into()));
    }
    let order = declared.len();

    // (words, log10 prob, log10 backoff) per order
    let mut raw: Vec<Vec<RawEntry>> = vec![Vec::new(); order];
    let mut current: Option<usize> = None;
    let mut saw_end = false;
    let rest: Vec<(usize, &str)> = pending.into_iter().chain(lines).collect();
    for (no, line) in rest {
        if line.is_empty() {
            continue;
        }
        if line == "\\end\\" {
            saw_end = true;
            break;
        }
        if let Some(k) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
            let k: usize = k.parse().map_err(|_| (no, format!("bad section `{line}`")))?;
            if k == 0 || k > order {
                return Err((no, format!("section for undeclared order {k}")));
            }
            current = Some(k);
            continue;
        }
        let k = current.ok_or((no, "n-gram line outside a section".to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != k + 1 && fields.len() != k + 2 {
            return Err((no, format!("expected {k} words in `{line}`")));
        }
        let num = |s: &str| -> ParseResult<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or((no, format!("bad number `{s}`")))
        };
        let prob = num(fields[0])?;
        let bow = fields.get(k + 1).map(|s| num(s)).transpose()?;
        raw[k - 1].push((fields[1..=k].to_vec(), prob, bow));
    }
    if !saw_end {
        return Err((0, "missing \\end\\ marker".into()));
    }
    for (k, (entries, &n)) in raw.iter().zip(&declared).enumerate() {
        if entries.len() != n {
            return Err((0, format!("{}-grams: declared {n}, found {}", k + 1, entries.len())));
        }
    }

    let mut words: Vec<String> = vec![UNK.into(), BOS.into(), EOS.into()];
    let mut others: Vec<&str> = raw[0]
        .iter()
        .map(|(w, _, _)| w[0])
        .filter(|w| ![UNK, BOS, EOS].contains(w))
        .collect();
    others.sort_unstable();
    others.dedup();
    words.extend(others.into_iter().map(str::to_string));
    let ids: HashMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    for reserved in [UNK, EOS] {
        if !raw[0].iter().any(|(w, _, _)| w[0] == reserved) {
            return Err((0, format!("unigram `{reserved}` missing")));
        }
    }

    let mut tables = vec![HashMap::new(); order];
    for (k, entries) in raw.into_iter().enumerate() {
        for (gram, lp, bow) in entries {
            let key: Box<[u32]> = gram
                .iter()
                .map(|w| ids.get(*w).copied().ok_or((0, format!("word `{w}` not among the unigrams"))))
                .collect::<ParseResult<_>>()?;
            tables[k].insert(
                key,
                Entry {
                    prob: from_log10(lp),
                    backoff: bow.map(from_log10),
                },
            );
        }
    }
    debug_assert_eq!((ids[UNK], ids[BOS], ids[EOS]), (UNK_ID, BOS_ID, EOS_ID));

    Ok(NgramModel {
        order,
        words,
        ids,
        tables,
        discounts: None,
    })
}
