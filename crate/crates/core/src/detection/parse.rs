//! Tolerant parser for YES/NO detection replies.
//!
//! Replies are split into clauses. A clause starts at a line break, at a
//! sentence end, or at a number that reads like a list key (`3:`, `#3`,
//! `component 3`). The first component key in a clause (number or name) is its
//! subject and the YES/NO words in the clause are its answer.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::catalog::{format_set, ComponentCatalog, ComponentId, ComponentSet};

use super::{DetectionReport, DetectionSource, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no answer for components: {}", format_set(.0))]
    MissingComponentAnswer(ComponentSet),
    #[error("both YES and NO given for component {0}")]
    AmbiguousAnswer(ComponentId),
    #[error("no component keys found in response")]
    UnparseableResponse,
}

/// Words after which a bare number is taken as a component key.
const KEY_WORDS: &[&str] = &["component", "components", "part", "item", "no", "number", "id"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Key(ComponentId),
    Answer(Verdict),
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Name variants matched for a component, longest first overall.
fn name_patterns(catalog: &ComponentCatalog) -> Vec<(String, ComponentId)> {
    let mut pats = Vec::new();
    for c in catalog.components() {
        let name = c.name.trim().to_ascii_lowercase();
        if name.is_empty() {
            continue;
        }
        if let Some(stem) = name.strip_suffix('s') {
            if stem.len() > 2 {
                pats.push((stem.to_string(), c.id));
            }
        } else {
            pats.push((format!("{name}s"), c.id));
        }
        pats.push((name, c.id));
    }
    pats.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
    pats
}

fn bounded(text: &[u8], start: usize, end: usize) -> bool {
    (start == 0 || !is_word_byte(text[start - 1])) && (end >= text.len() || !is_word_byte(text[end]))
}

/// Tokenizes one line. Returns (position, token) pairs and the positions at
/// which a new clause begins.
fn scan_line(
    line: &str,
    names: &[(String, ComponentId)],
    n: u32,
) -> (Vec<(usize, Token)>, Vec<usize>) {
    let lower = line.to_ascii_lowercase();
    let mut masked = lower.clone().into_bytes();
    let mut tokens = Vec::new();
    let mut splits = Vec::new();

    for (pat, id) in names {
        let pb = pat.as_bytes();
        let mut from = 0;
        while let Some(off) = find_bytes(&masked[from..], pb) {
            let start = from + off;
            let end = start + pb.len();
            if bounded(&masked, start, end) {
                tokens.push((start, Token::Key(*id)));
                for b in &mut masked[start..end] {
                    *b = b' ';
                }
            }
            from = start + 1;
        }
    }

    let bytes = &masked;
    let mut i = 0;
    while i < bytes.len() {
        if !is_word_byte(bytes[i]) {
            // Sentence end: '.', ';' or '!' after a non-digit, followed by space or end.
            if matches!(bytes[i], b'.' | b';' | b'!')
                && (i + 1 >= bytes.len() || bytes[i + 1].is_ascii_whitespace())
                && (i == 0 || !bytes[i - 1].is_ascii_digit())
            {
                splits.push(i + 1);
            }
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && is_word_byte(bytes[i]) {
            i += 1;
        }
        let word = &lower[start..i];
        match word {
            "yes" => tokens.push((start, Token::Answer(Verdict::Present))),
            "no" => {
                // "No." / "No 3" as a numbering prefix is not an answer.
                let next_is_number = lower[i..]
                    .trim_start_matches(['.', ' ', '#'])
                    .starts_with(|c: char| c.is_ascii_digit());
                if !next_is_number {
                    tokens.push((start, Token::Answer(Verdict::Absent)));
                }
            }
            _ if word.bytes().all(|b| b.is_ascii_digit()) => {
                let decimal_neighbour = (start >= 2
                    && bytes[start - 1] == b'.'
                    && bytes[start - 2].is_ascii_digit())
                    || (i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit());
                let value = word.parse::<u32>().ok().filter(|v| *v >= 1 && *v <= n);
                if let (Some(v), false) = (value, decimal_neighbour) {
                    tokens.push((start, Token::Key(ComponentId(v))));
                    if let Some(clause_start) = key_like_start(&lower, start) {
                        splits.push(clause_start);
                    }
                }
            }
            _ => {}
        }
    }
    tokens.sort_by_key(|(p, _)| *p);
    (tokens, splits)
}

/// If the number at `pos` reads like a list key, returns where its clause starts.
fn key_like_start(lower: &str, pos: usize) -> Option<usize> {
    let before = &lower[..pos];
    let trimmed = before.trim_end_matches([' ', '#', '(', '[', '*', '-', '\t']);
    if trimmed.trim().is_empty() {
        return Some(0);
    }
    if trimmed.ends_with([',', ':', ';', '.', '!', '?']) {
        return Some(pos);
    }
    let word_start = trimmed
        .char_indices()
        .rev()
        .find(|(_, c)| !c.is_ascii_alphanumeric())
        .map_or(0, |(i, c)| i + c.len_utf8());
    let prev_word = &trimmed[word_start..];
    if KEY_WORDS.contains(&prev_word) {
        return Some(word_start);
    }
    if before.ends_with('#') {
        return Some(pos.saturating_sub(1));
    }
    None
}

fn find_bytes(hay: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || hay.len() < needle.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Parses a free-text reply into a complete report or an error.
///
/// Never returns a partial report: either every catalog component gets a
/// verdict or the call fails.
pub fn parse_detection_response(
    text: &str,
    catalog: &ComponentCatalog,
) -> Result<DetectionReport, ParseError> {
    let names = name_patterns(catalog);
    let n = catalog.len() as u32;
    let mut answers: BTreeMap<ComponentId, Verdict> = BTreeMap::new();
    let mut any_key = false;

    for line in text.lines() {
        let (tokens, mut splits) = scan_line(line, &names, n);
        if tokens.is_empty() {
            continue;
        }
        splits.push(0);
        splits.push(line.len() + 1);
        splits.sort_unstable();
        splits.dedup();

        for window in splits.windows(2) {
            let (lo, hi) = (window[0], window[1]);
            let clause: Vec<Token> = tokens
                .iter()
                .filter(|(p, _)| *p >= lo && *p < hi)
                .map(|(_, t)| *t)
                .collect();
            let Some(subject) = clause.iter().find_map(|t| match t {
                Token::Key(id) => Some(*id),
                Token::Answer(_) => None,
            }) else {
                continue;
            };
            any_key = true;
            let mut verdict = None;
            for t in &clause {
                if let Token::Answer(v) = t {
                    match verdict {
                        None => verdict = Some(*v),
                        Some(prev) if prev != *v => return Err(ParseError::AmbiguousAnswer(subject)),
                        Some(_) => {}
                    }
                }
            }
            if let Some(v) = verdict {
                match answers.insert(subject, v) {
                    Some(prev) if prev != v => return Err(ParseError::AmbiguousAnswer(subject)),
                    _ => {}
                }
            }
        }
    }

    if !any_key {
        return Err(ParseError::UnparseableResponse);
    }
    let missing: ComponentSet = catalog.ids().filter(|id| !answers.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(ParseError::MissingComponentAnswer(missing));
    }
    Ok(DetectionReport {
        verdicts: answers,
        source: DetectionSource::Llm,
        raw_text: Some(text.to_string()),
        timestamp: 0.0,
        usage: None,
    })
}
