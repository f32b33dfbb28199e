//! Rule-based sentence splitting.
//!
//! A boundary falls after a whitespace token ending in `.`, `!`, `?` or `…`
//! (optionally followed by closing quotes or brackets) when the next token
//! starts with an uppercase letter or a digit, possibly behind opening quotes
//! or brackets. Known abbreviations and ordinal numbers (`3.`) never end a
//! sentence.

const ABBREVIATIONS: &[&str] = &[
    // German
    "abb.", "abs.", "allg.", "bd.", "bspw.", "bzgl.", "bzw.", "ca.", "d.h.", "dgl.", "dr.", "evtl.",
    "fa.", "ff.", "fr.", "geb.", "ggf.", "hr.", "hrsg.", "inkl.", "jh.", "kap.", "max.", "med.",
    "min.", "mio.", "mrd.", "nr.", "o.ä.", "prof.", "s.", "sog.", "std.", "str.", "tab.", "u.a.",
    "u.ä.", "usw.", "u.u.", "vgl.", "z.b.", "z.t.", "zzgl.",
    // English source documents
    "al.", "approx.", "cf.", "e.g.", "etc.", "fig.", "figs.", "i.e.", "mr.", "mrs.", "ms.", "no.",
    "pp.", "resp.", "st.", "vol.", "vs.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '»', '«', '”', '“', '’'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '„', '“', '»', '«', '‘'];

fn ends_sentence(token: &str) -> bool {
    let core = token.trim_end_matches(CLOSERS);
    if !core.ends_with(['.', '!', '?', '…']) {
        return false;
    }
    if core.ends_with('.') && !core.ends_with("..") {
        let bare = core.trim_start_matches(OPENERS).to_lowercase();
        if ABBREVIATIONS.contains(&bare.as_str()) {
            return false;
        }
        let digits = &bare[..bare.len() - 1];
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
    }
    true
}

fn starts_sentence(token: &str) -> bool {
    token
        .trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Splits `text` into sentences; each sentence is whitespace-normalized and
/// non-empty.
pub fn split_sentences(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let last = i + 1 == tokens.len();
        if last || (ends_sentence(tokens[i]) && starts_sentence(tokens[i + 1])) {
            out.push(tokens[start..=i].join(" "));
            start = i + 1;
        }
    }
    out
}
