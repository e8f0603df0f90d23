//! Small text helpers shared by the metrics and the heuristic backends.

use alloc::string::String;
use alloc::vec::Vec;

pub(crate) const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "its", "their", "our", "your",
    "my", "some", "any", "each", "every", "all",
];

pub(crate) const PREPOSITIONS: &[&str] = &[
    "to", "for", "of", "in", "on", "at", "by", "with", "from", "into", "onto", "about", "after",
    "before", "via", "through", "over", "under", "within", "without", "per", "as", "and", "or",
    "but", "if", "then", "when", "while", "until", "so",
];

pub(crate) const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "must", "should", "shall", "will",
    "would", "can", "could", "may", "might", "has", "have", "had", "do", "does", "did",
];

pub(crate) const NEGATIONS: &[&str] = &["not", "no", "never"];

/// Leading words that are not the predicate of an action phrase.
pub(crate) const NON_VERBS: &[&str] = &["please", "then", "also", "first", "finally", "to", "and"];

pub(crate) fn is_one_of(word: &str, list: &[&str]) -> bool {
    list.contains(&word)
}

/// Tokens for BLEU: punctuation characters become their own tokens, then the
/// text is split on whitespace.
pub(crate) fn bleu_tokens(s: &str, case_fold: bool) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
        } else if !ch.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
            out.push(ch.into());
        } else if case_fold {
            cur.extend(ch.to_lowercase());
        } else {
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Lower-cased words with surrounding punctuation trimmed. Inner
/// apostrophes and hyphens survive ("don't", "e-mail").
pub(crate) fn words(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub(crate) fn fold(s: &str) -> String {
    s.to_lowercase()
}
