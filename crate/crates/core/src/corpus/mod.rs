//! Verse-aligned parallel corpus model.
//!
//! A corpus pairs a Chinese source text with one human reference translation
//! (the version id `expert` is reserved for it) and any number of candidate
//! translations. Alignment is at verse granularity: every version must cover
//! exactly the same (chapter, verse) keys.

mod ingest;
mod segment;

pub use ingest::{
    ingest_corpus, read_version_records, write_version_file, CorpusManifest, MANIFEST_FILE,
    SOURCE_FILE_STEM,
};
pub use segment::{
    segment_sentences, Language, SegmentError, SegmentOptions, SegmentedText,
    SEGMENTATION_RULES_VERSION,
};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved id for the human reference translation.
pub const EXPERT_VERSION: &str = "expert";

/// Identifier of one translation version within a corpus.
///
/// Ids double as file stems on disk, so they are restricted to lowercase
/// ASCII alphanumerics plus `_` and `-`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionId(String);

impl VersionId {
    pub fn new(id: &str) -> Result<Self, CorpusError> {
        let ok = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        if ok {
            Ok(VersionId(id.to_string()))
        } else {
            Err(CorpusError::InvalidVersionId { id: id.to_string() })
        }
    }

    pub fn expert() -> Self {
        VersionId(EXPERT_VERSION.to_string())
    }

    pub fn is_expert(&self) -> bool {
        self.0 == EXPERT_VERSION
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Genre of the source text. One corpus holds exactly one genre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextType {
    News,
    ClassicalLiterature,
    ModernFiction,
}

impl TextType {
    /// Stable id used in file columns and manifests.
    pub fn as_str(&self) -> &str {
        match self {
            TextType::News => "news",
            TextType::ClassicalLiterature => "classical_literature",
            TextType::ModernFiction => "modern_fiction",
        }
    }

    /// Human-readable label used in table headings.
    pub fn label(&self) -> &str {
        match self {
            TextType::News => "News",
            TextType::ClassicalLiterature => "Classical Literature",
            TextType::ModernFiction => "Modern Fiction",
        }
    }
}

impl fmt::Display for TextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One aligned verse: source, reference, and all candidate translations.
///
/// Paragraph breaks inside any text are encoded as `\n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedUnit {
    pub chapter: u32,
    pub verse: u32,
    pub source_zh: String,
    pub reference_en: String,
    pub candidates: BTreeMap<VersionId, String>,
}

impl AlignedUnit {
    /// Text of `version`, where `expert` resolves to the reference.
    pub fn text_of(&self, version: &VersionId) -> Option<&str> {
        if version.is_expert() {
            Some(&self.reference_en)
        } else {
            self.candidates.get(version).map(String::as_str)
        }
    }
}

/// Consecutive run of verses sharing a chapter index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    pub index: u32,
    pub units: Vec<AlignedUnit>,
}

/// A fully aligned corpus of one text type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub id: String,
    pub text_type: TextType,
    /// Candidate versions, `expert` excluded.
    pub candidate_versions: Vec<VersionId>,
    pub chapters: Vec<Chapter>,
}

impl Corpus {
    /// All versions carrying English text: `expert` first, then candidates.
    pub fn versions(&self) -> Vec<VersionId> {
        let mut out = vec![VersionId::expert()];
        out.extend(self.candidate_versions.iter().cloned());
        out
    }

    pub fn units(&self) -> impl Iterator<Item = &AlignedUnit> {
        self.chapters.iter().flat_map(|c| c.units.iter())
    }

    pub fn unit_count(&self) -> usize {
        self.chapters.iter().map(|c| c.units.len()).sum()
    }

    /// Checks every structural invariant, returning the first violation.
    ///
    /// Chapters must be contiguous from 1, verses strictly increasing within
    /// a chapter, all texts non-empty, and every unit must carry a candidate
    /// for every declared version.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.candidate_versions.iter().any(|v| v.is_expert()) {
            return Err(CorpusError::Invalid {
                message: "'expert' cannot appear among candidate versions".into(),
            });
        }
        for (i, chapter) in self.chapters.iter().enumerate() {
            let expected = i as u32 + 1;
            if chapter.index != expected {
                return Err(CorpusError::NonContiguousChapters {
                    expected,
                    found: chapter.index,
                });
            }
            let mut prev_verse: Option<u32> = None;
            for unit in &chapter.units {
                if unit.chapter != chapter.index {
                    return Err(CorpusError::Invalid {
                        message: format!(
                            "unit {}:{} filed under chapter {}",
                            unit.chapter, unit.verse, chapter.index
                        ),
                    });
                }
                if let Some(p) = prev_verse {
                    if unit.verse <= p {
                        return Err(CorpusError::Invalid {
                            message: format!(
                                "verse order violated at {}:{} (previous {})",
                                unit.chapter, unit.verse, p
                            ),
                        });
                    }
                }
                prev_verse = Some(unit.verse);
                if unit.source_zh.trim().is_empty() {
                    return Err(CorpusError::Invalid {
                        message: format!("empty source text at {}:{}", unit.chapter, unit.verse),
                    });
                }
                if unit.reference_en.trim().is_empty() {
                    return Err(CorpusError::Invalid {
                        message: format!("empty reference at {}:{}", unit.chapter, unit.verse),
                    });
                }
                for version in &self.candidate_versions {
                    match unit.candidates.get(version) {
                        Some(t) if !t.trim().is_empty() => {}
                        _ => {
                            return Err(CorpusError::AlignmentGap {
                                version: version.clone(),
                                chapter: unit.chapter,
                                verse: unit.verse,
                            })
                        }
                    }
                }
                for extra in unit.candidates.keys() {
                    if !self.candidate_versions.contains(extra) {
                        return Err(CorpusError::Invalid {
                            message: format!(
                                "undeclared version '{extra}' at {}:{}",
                                unit.chapter, unit.verse
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sentence totals per version, computed with the English segmenter.
///
/// The empty corpus yields zero for every version.
pub fn sentence_counts(
    corpus: &Corpus,
    options: &SegmentOptions,
) -> Result<BTreeMap<VersionId, usize>, SegmentError> {
    let mut counts: BTreeMap<VersionId, usize> = BTreeMap::new();
    for version in corpus.versions() {
        let mut total = 0;
        for unit in corpus.units() {
            let text = unit
                .text_of(&version)
                .expect("validated corpus covers every version");
            total += segment_sentences(text, Language::English, options)?
                .sentences
                .len();
        }
        counts.insert(version, total);
    }
    Ok(counts)
}

// Frequent characters whose simplified and traditional forms differ. Small on
// purpose: enough to notice a mixed-script source, not a converter.
const SIMPLIFIED_MARKERS: &[char] = &[
    '国', '说', '话', '东', '车', '门', '长', '们', '还', '这', '对', '开', '关', '时', '书', '会',
    '学', '头', '见', '爱', '儿', '风', '马', '鸟', '龙', '万', '与', '几', '个', '当',
];
const TRADITIONAL_MARKERS: &[char] = &[
    '國', '說', '話', '東', '車', '門', '長', '們', '還', '這', '對', '開', '關', '時', '書', '會',
    '學', '頭', '見', '愛', '兒', '風', '馬', '鳥', '龍', '萬', '與', '幾', '個', '當',
];

/// Warns when the source text mixes simplified and traditional characters.
pub fn script_mix_warnings(corpus: &Corpus) -> Vec<String> {
    let mut simplified_at: Option<(u32, u32)> = None;
    let mut traditional_at: Option<(u32, u32)> = None;
    for unit in corpus.units() {
        for ch in unit.source_zh.chars() {
            if simplified_at.is_none() && SIMPLIFIED_MARKERS.contains(&ch) {
                simplified_at = Some((unit.chapter, unit.verse));
            }
            if traditional_at.is_none() && TRADITIONAL_MARKERS.contains(&ch) {
                traditional_at = Some((unit.chapter, unit.verse));
            }
        }
        if simplified_at.is_some() && traditional_at.is_some() {
            break;
        }
    }
    match (simplified_at, traditional_at) {
        (Some((sc, sv)), Some((tc, tv))) => vec![format!(
            "corpus '{}': source mixes simplified (first at {}:{}) and traditional (first at {}:{}) characters",
            corpus.id, sc, sv, tc, tv
        )],
        _ => Vec::new(),
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("missing file for version '{version}': {path}")]
    MissingVersionFile { version: String, path: String },
    #[error("{path} is not valid UTF-8 (first invalid byte at offset {byte_offset})")]
    Encoding { path: String, byte_offset: usize },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("alignment gap: version '{version}' has no text for {chapter}:{verse}")]
    AlignmentGap {
        version: VersionId,
        chapter: u32,
        verse: u32,
    },
    #[error("chapter indices must be contiguous from 1: expected {expected}, found {found}")]
    NonContiguousChapters { expected: u32, found: u32 },
    #[error("invalid version id '{id}'")]
    InvalidVersionId { id: String },
    #[error("invalid corpus: {message}")]
    Invalid { message: String },
}
