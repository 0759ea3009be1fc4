//! Rule-based sentence segmentation for Chinese and English text.
//!
//! The rules are deliberately frozen: analysis results are only comparable
//! when every run segments identically, so any rule change must bump
//! [`SEGMENTATION_RULES_VERSION`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::VersionId;

/// Bumped whenever a segmentation rule changes; recorded in run manifests.
pub const SEGMENTATION_RULES_VERSION: &str = "zh-en/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Chinese,
    English,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Treat the full-width comma as a sentence terminator in Chinese text.
    /// Off by default: clause-level analysis only.
    pub comma_splits: bool,
}

/// Sentences of one text, with each sentence mapped to its paragraph.
///
/// Paragraphs are newline-delimited input lines; blank lines do not count.
/// `paragraph_of[i]` is the zero-based paragraph of `sentences[i]` and is
/// non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedText {
    pub origin: Option<VersionId>,
    pub sentences: Vec<String>,
    pub paragraph_of: Vec<usize>,
}

impl SegmentedText {
    pub fn with_origin(mut self, origin: VersionId) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraph_of.last().map_or(0, |p| p + 1)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("cannot segment empty input")]
    EmptyInput,
}

const ZH_TERMINATORS: &[char] = &['。', '！', '？', '…', '；'];
const ZH_COMMA: char = '，';
// Exactly the closing marks that attach to the preceding sentence.
const ZH_CLOSERS: &[char] = &['」', '』', '”', '’', '）'];

const EN_TERMINATORS: &[char] = &['.', '!', '?'];
const EN_CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']'];
const EN_OPENERS: &[char] = &['"', '\'', '“', '‘', '(', '['];

// A period after these tokens never ends a sentence. Lowercase, internal
// periods kept.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "rev", "hon", "st", "sr", "jr", "capt", "gen", "col", "sgt",
    "lt", "vs", "etc", "inc", "ltd", "co", "corp", "no", "vol", "pp", "ca", "cf", "al", "eg", "ie",
    "e.g", "i.e", "u.s", "u.k", "a.m", "p.m", "fig", "dept", "est", "approx",
];

/// Splits `text` into sentences under the frozen rule set.
///
/// Segmenting a sentence of the output again returns that sentence, and the
/// concatenated output preserves every non-whitespace character of the input
/// in order.
pub fn segment_sentences(
    text: &str,
    language: Language,
    options: &SegmentOptions,
) -> Result<SegmentedText, SegmentError> {
    if text.trim().is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    let mut sentences = Vec::new();
    let mut paragraph_of = Vec::new();
    let mut paragraph = 0usize;
    for line in text.split('\n') {
        if line.trim().is_empty() {
            continue;
        }
        let before = sentences.len();
        match language {
            Language::Chinese => segment_chinese(line, options, &mut sentences),
            Language::English => segment_english(line, &mut sentences),
        }
        paragraph_of.extend(std::iter::repeat(paragraph).take(sentences.len() - before));
        paragraph += 1;
    }
    Ok(SegmentedText {
        origin: None,
        sentences,
        paragraph_of,
    })
}

fn is_zh_terminator(c: char, options: &SegmentOptions) -> bool {
    ZH_TERMINATORS.contains(&c) || (options.comma_splits && c == ZH_COMMA)
}

fn segment_chinese(line: &str, options: &SegmentOptions, out: &mut Vec<String>) {
    let chars: Vec<char> = line.chars().collect();
    let mut buf = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        buf.push(c);
        if is_zh_terminator(c, options) {
            // A run of terminators (e.g. double ellipsis) plus trailing
            // closers belongs to the sentence it ends.
            let mut j = i + 1;
            while j < chars.len() && is_zh_terminator(chars[j], options) {
                buf.push(chars[j]);
                j += 1;
            }
            while j < chars.len() && ZH_CLOSERS.contains(&chars[j]) {
                buf.push(chars[j]);
                j += 1;
            }
            flush(&mut buf, out);
            i = j;
        } else {
            i += 1;
        }
    }
    flush(&mut buf, out);
}

fn segment_english(line: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = line.chars().collect();
    let mut buf = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        buf.push(c);
        if EN_TERMINATORS.contains(&c) {
            let mut j = i + 1;
            while j < chars.len() && EN_TERMINATORS.contains(&chars[j]) {
                buf.push(chars[j]);
                j += 1;
            }
            let lone_period = c == '.' && j == i + 1;
            while j < chars.len() && EN_CLOSERS.contains(&chars[j]) {
                buf.push(chars[j]);
                j += 1;
            }
            let abbreviated = lone_period && ends_with_abbreviation(&chars[..i]);
            if !abbreviated && boundary_follows(&chars, j) {
                flush(&mut buf, out);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    flush(&mut buf, out);
}

// True at end of line, or when whitespace leads (via optional opening
// quotes/brackets) to a capital letter.
fn boundary_follows(chars: &[char], mut k: usize) -> bool {
    if k >= chars.len() {
        return true;
    }
    if !chars[k].is_whitespace() {
        return false;
    }
    while k < chars.len() && chars[k].is_whitespace() {
        k += 1;
    }
    while k < chars.len() && EN_OPENERS.contains(&chars[k]) {
        k += 1;
    }
    k >= chars.len() || chars[k].is_uppercase()
}

// The word right before a period, scanning back over letters and internal
// periods. "Mr", "e.g" and single initials suppress the boundary.
fn ends_with_abbreviation(before: &[char]) -> bool {
    let mut token = String::new();
    for &c in before.iter().rev() {
        if c.is_alphabetic() || c == '.' {
            token.insert(0, c.to_ascii_lowercase());
        } else {
            break;
        }
    }
    let token = token.trim_matches('.').to_string();
    if token.is_empty() {
        return false;
    }
    if token.chars().count() == 1 && token.chars().all(|c| c.is_alphabetic()) {
        return true;
    }
    ABBREVIATIONS.contains(&token.as_str())
}

fn flush(buf: &mut String, out: &mut Vec<String>) {
    let trimmed = buf.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    buf.clear();
}
