//! Token-overlap matching shared by the simulated tools and the heuristic planner.

use std::collections::BTreeSet;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "during", "for", "from",
    "happens", "has", "have", "in", "into", "is", "it", "its", "of", "on", "or", "right",
    "someone", "that", "the", "their", "then", "there", "this", "to", "video", "was", "were",
    "what", "when", "where", "which", "while", "who", "why", "with",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercased alphanumeric tokens, in order, stopwords included.
pub fn raw_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Lowercased, stopword-stripped content tokens.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    raw_tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

pub fn overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    a.intersection(b).count()
}

/// True when every token of `phrase` occurs, contiguously and in order, in `text`.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let hay = raw_tokens(text);
    let needle = raw_tokens(phrase);
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Text between the first pair of single quotes, if any.
pub fn quoted(text: &str) -> Option<&str> {
    let start = text.find('\'')?;
    let rest = &text[start + 1..];
    let end = rest.find('\'')?;
    let inner = rest[..end].trim();
    (!inner.is_empty()).then_some(inner)
}

pub fn plural(label: &str) -> String {
    match label {
        "person" => "people".to_string(),
        "bus" => "buses".to_string(),
        _ => format!("{label}s"),
    }
}

pub fn singular(word: &str) -> String {
    match word {
        "people" => "person".to_string(),
        "buses" => "bus".to_string(),
        w if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") => w[..w.len() - 1].to_string(),
        w => w.to_string(),
    }
}
