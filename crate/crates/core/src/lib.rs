//! Evaluation toolkit for Chinese-to-English translation quality.
//!
//! The crate is organised around a verse-aligned parallel corpus: one
//! reference translation plus any number of machine translated versions of
//! the same source text. On top of that model it provides
//!
//! - sentence segmentation for Chinese and English ([`corpus::segment_sentences`]),
//! - n-gram frequency profiles with stopword filtering ([`lexical`]),
//! - nine-category sentiment aggregation and polarity deviation ([`sentiment`]),
//! - embedding cosine similarity with chapter-level aggregation ([`semantic`]),
//! - token-level greedy matching scores ([`tokenmatch`]),
//! - cached, retrying clients for translation / embedding / sentiment
//!   endpoints plus deterministic mocks ([`providers`]),
//! - table assembly and deterministic CSV/JSON export ([`report`]).

pub mod corpus;
pub mod lexical;
pub mod providers;
pub mod report;
pub mod semantic;
pub mod sentiment;
pub mod tokenmatch;

pub use corpus::{AlignedUnit, Chapter, Corpus, Language, TextType, VersionId};
pub use semantic::EmbeddingVector;
