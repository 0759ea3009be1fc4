//! Tokenization, stopword filtering, and n-gram frequency tables.
//!
//! Tokens are maximal runs of letters, lowercased, with apostrophes kept
//! when they sit between letters ("yu's" stays one token). Everything else,
//! digits included, separates tokens. N-gram windows are taken per token
//! stream, so feeding one stream per sentence keeps windows from crossing
//! sentence boundaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::VersionId;

/// Shipped English stopword list, one lowercase word per line.
const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub origin: Option<VersionId>,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn with_origin(mut self, origin: VersionId) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases and splits `text` on non-letter boundaries.
///
/// Curly apostrophes are normalized to `'` so stopword entries match both
/// typographic styles. The empty token stream is valid output.
pub fn tokenize(text: &str) -> TokenStream {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphabetic() {
            current.extend(c.to_lowercase());
        } else if (c == '\'' || c == '\u{2019}')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenStream {
        origin: None,
        tokens,
    }
}

/// A fixed set of words excluded from frequency analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Stoplist {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// The bundled English function-word list.
    pub fn english() -> &'static Stoplist {
        static LIST: OnceLock<Stoplist> = OnceLock::new();
        LIST.get_or_init(|| Stoplist::from_words(STOPWORDS_EN.lines()))
    }

    /// SHA-256 of the bundled list file, recorded in run manifests so a
    /// silent list change cannot masquerade as the same analysis.
    pub fn english_content_hash() -> String {
        let digest = Sha256::digest(STOPWORDS_EN.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("writing to string");
        }
        hex
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Removes stoplisted tokens, preserving order and origin.
pub fn remove_stopwords(stream: &TokenStream, stoplist: &Stoplist) -> TokenStream {
    TokenStream {
        origin: stream.origin.clone(),
        tokens: stream
            .tokens
            .iter()
            .filter(|t| !stoplist.contains(t))
            .cloned()
            .collect(),
    }
}

pub type Ngram = Vec<String>;

/// Frequency table of n-grams accumulated over one or more token streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramTable {
    n: usize,
    counts: BTreeMap<Ngram, u64>,
}

impl NgramTable {
    pub fn new(n: usize) -> Result<Self, LexicalError> {
        if n == 0 {
            return Err(LexicalError::InvalidN);
        }
        Ok(NgramTable {
            n,
            counts: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds every window of the stream. Streams shorter than `n` contribute
    /// nothing; windows never span two calls.
    pub fn add_stream(&mut self, stream: &TokenStream) {
        for window in stream.tokens.windows(self.n) {
            *self.counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }

    pub fn counts(&self) -> &BTreeMap<Ngram, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Counts n-grams of a single stream.
pub fn ngram_counts(stream: &TokenStream, n: usize) -> Result<NgramTable, LexicalError> {
    let mut table = NgramTable::new(n)?;
    table.add_stream(stream);
    Ok(table)
}

/// Counts n-grams across many streams without crossing stream boundaries.
pub fn ngram_counts_by_sentence<'a, I>(streams: I, n: usize) -> Result<NgramTable, LexicalError>
where
    I: IntoIterator<Item = &'a TokenStream>,
{
    let mut table = NgramTable::new(n)?;
    for stream in streams {
        table.add_stream(stream);
    }
    Ok(table)
}

/// The `k` most frequent n-grams: count descending, ties in lexicographic
/// order of the token tuple.
pub fn top_k(table: &NgramTable, k: usize) -> Vec<(Ngram, u64)> {
    let mut rows: Vec<(Ngram, u64)> = table
        .counts
        .iter()
        .map(|(g, &c)| (g.clone(), c))
        .collect();
    // BTreeMap iteration is lexicographic, so a stable sort on the count
    // alone leaves ties in tuple order.
    rows.sort_by(|a, b| b.1.cmp(&a.1));
    rows.truncate(k);
    rows
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexicalError {
    #[error("n-gram size must be at least 1")]
    InvalidN,
}
