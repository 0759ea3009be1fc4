//! Embedding-based semantic similarity and its corpus-level aggregation.
//!
//! Scores flow bottom-up: cosine per verse, unweighted mean per chapter,
//! unweighted mean of chapter means per corpus. Chapter means are kept
//! un-rounded internally; formatting happens at export time only.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, VersionId};
use crate::providers::{ProviderError, SentenceEmbedder};

/// Dense embedding with strictly positive dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0.0)
    }
}

/// Cosine of the angle between `a` and `b`.
///
/// Both vectors are normalized before the dot product, which keeps the
/// result finite for very small norms. The result is not clamped.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SemanticError> {
    if a.dimension() != b.dimension() {
        return Err(SemanticError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let ua = unit_direction(a.values()).ok_or(SemanticError::ZeroVector { side: "first" })?;
    let ub = unit_direction(b.values()).ok_or(SemanticError::ZeroVector { side: "second" })?;
    Ok(ua.iter().zip(&ub).map(|(x, y)| x * y).sum())
}

// Dividing by the largest magnitude first keeps the squared sum
// representable even when every component would underflow (or overflow)
// if squared directly.
fn unit_direction(values: &[f64]) -> Option<Vec<f64>> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let scaled: Vec<f64> = values.iter().map(|v| v / scale).collect();
    let norm = scaled.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some(scaled.iter().map(|x| x / norm).collect())
}

/// Similarity of one candidate verse against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub chapter: u32,
    pub verse: u32,
    pub version: VersionId,
    pub score: f64,
}

/// A verse skipped during scoring, with the reason kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub chapter: u32,
    pub verse: u32,
    pub version: VersionId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    /// Ordered by (chapter, verse, version).
    pub records: Vec<SimilarityRecord>,
    pub skipped: Vec<SkippedUnit>,
}

// Provider arithmetic can legitimately overshoot |1| by rounding noise, but
// anything past this is corrupt data, not rounding.
const SCORE_TOLERANCE: f64 = 1e-9;

/// Scores every candidate verse of `corpus` against the reference.
///
/// Zero-vector embeddings skip the affected record instead of failing the
/// run; every other provider problem aborts with the verse identity.
pub fn score_corpus(
    corpus: &Corpus,
    embedder: &dyn SentenceEmbedder,
) -> Result<CorpusScores, SemanticError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for unit in corpus.units() {
        let at = |version: &VersionId, e: ProviderError| SemanticError::Provider {
            chapter: unit.chapter,
            verse: unit.verse,
            version: version.clone(),
            source: Box::new(e),
        };
        let expert = VersionId::expert();
        let reference = embed_one(embedder, &unit.reference_en).map_err(|e| at(&expert, e))?;
        for version in &corpus.candidate_versions {
            let text = unit
                .text_of(version)
                .expect("validated corpus covers every version");
            let candidate = embed_one(embedder, text).map_err(|e| at(version, e))?;
            match cosine_similarity(&reference, &candidate) {
                Ok(score) => {
                    if score.abs() > 1.0 + SCORE_TOLERANCE || !score.is_finite() {
                        return Err(SemanticError::ScoreOutOfBounds {
                            chapter: unit.chapter,
                            verse: unit.verse,
                            version: version.clone(),
                            score,
                        });
                    }
                    records.push(SimilarityRecord {
                        chapter: unit.chapter,
                        verse: unit.verse,
                        version: version.clone(),
                        score,
                    });
                }
                Err(SemanticError::ZeroVector { side }) => skipped.push(SkippedUnit {
                    chapter: unit.chapter,
                    verse: unit.verse,
                    version: version.clone(),
                    reason: format!("zero embedding vector ({side} argument)"),
                }),
                Err(other) => return Err(other),
            }
        }
    }
    Ok(CorpusScores { records, skipped })
}

fn embed_one(embedder: &dyn SentenceEmbedder, text: &str) -> Result<EmbeddingVector, ProviderError> {
    let mut vectors = embedder.embed_sentences(&[text])?;
    Ok(vectors.remove(0))
}

/// Per-chapter aggregation of similarity records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterSummary {
    pub chapter: u32,
    pub version_means: BTreeMap<VersionId, f64>,
    /// Mean of the per-version means of this chapter.
    pub overall_mean: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Groups records by chapter and averages per version.
pub fn chapter_means(records: &[SimilarityRecord]) -> Result<Vec<ChapterSummary>, SemanticError> {
    if records.is_empty() {
        return Err(SemanticError::EmptyInput);
    }
    let mut by_chapter: BTreeMap<u32, BTreeMap<VersionId, Vec<f64>>> = BTreeMap::new();
    for r in records {
        by_chapter
            .entry(r.chapter)
            .or_default()
            .entry(r.version.clone())
            .or_default()
            .push(r.score);
    }
    Ok(by_chapter
        .into_iter()
        .map(|(chapter, versions)| {
            let version_means: BTreeMap<VersionId, f64> = versions
                .into_iter()
                .map(|(v, scores)| (v, mean(&scores)))
                .collect();
            let overall_mean = mean(&version_means.values().copied().collect::<Vec<_>>());
            ChapterSummary {
                chapter,
                version_means,
                overall_mean,
            }
        })
        .collect())
}

/// Corpus-level mean per version: the unweighted mean of its chapter means.
pub fn corpus_means(summaries: &[ChapterSummary]) -> BTreeMap<VersionId, f64> {
    let mut per_version: BTreeMap<VersionId, Vec<f64>> = BTreeMap::new();
    for summary in summaries {
        for (version, &m) in &summary.version_means {
            per_version.entry(version.clone()).or_default().push(m);
        }
    }
    per_version
        .into_iter()
        .map(|(v, means)| (v, mean(&means)))
        .collect()
}

/// Spread of one version's chapter means, in percentage points.
pub fn inter_chapter_variation(
    summaries: &[ChapterSummary],
    version: &VersionId,
) -> Result<f64, SemanticError> {
    let means: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.version_means.get(version).copied())
        .collect();
    if means.len() < 2 {
        return Err(SemanticError::InsufficientChapters { found: means.len() });
    }
    let max = means.iter().cloned().fold(f64::MIN, f64::max);
    let min = means.iter().cloned().fold(f64::MAX, f64::min);
    Ok(100.0 * (max - min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeDirection {
    Lowest,
    Highest,
}

/// One verse ranked by its mean score across versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerseExtreme {
    pub chapter: u32,
    pub verse: u32,
    pub mean_score: f64,
    pub version_scores: BTreeMap<VersionId, f64>,
}

/// The `k` verses with the lowest or highest mean score across versions.
/// Ties take the lower (chapter, verse) first in both directions.
pub fn extremes(
    records: &[SimilarityRecord],
    k: usize,
    direction: ExtremeDirection,
) -> Result<Vec<VerseExtreme>, SemanticError> {
    if records.is_empty() {
        return Err(SemanticError::EmptyInput);
    }
    let mut by_verse: BTreeMap<(u32, u32), BTreeMap<VersionId, f64>> = BTreeMap::new();
    for r in records {
        by_verse
            .entry((r.chapter, r.verse))
            .or_default()
            .insert(r.version.clone(), r.score);
    }
    let mut verses: Vec<VerseExtreme> = by_verse
        .into_iter()
        .map(|((chapter, verse), version_scores)| {
            let mean_score = mean(&version_scores.values().copied().collect::<Vec<_>>());
            VerseExtreme {
                chapter,
                verse,
                mean_score,
                version_scores,
            }
        })
        .collect();
    // Input order from the BTreeMap is (chapter, verse) ascending; a stable
    // sort on the score alone therefore leaves ties in that order.
    match direction {
        ExtremeDirection::Lowest => verses.sort_by(|a, b| a.mean_score.total_cmp(&b.mean_score)),
        ExtremeDirection::Highest => verses.sort_by(|a, b| b.mean_score.total_cmp(&a.mean_score)),
    }
    verses.truncate(k);
    Ok(verses)
}

/// Outcome of the paired bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub p_value: f64,
    /// Observed mean difference, first system minus second.
    pub mean_difference: f64,
    pub pairs: usize,
    pub resamples: usize,
    pub seed: u64,
}

/// Two-sided paired bootstrap on the mean score difference.
///
/// Differences are centered, resampled with replacement `resamples` times,
/// and the p-value is the add-one-smoothed share of resampled means at least
/// as extreme as the observed one. Identical seeds give identical p-values.
pub fn significance_test(
    a: &[SimilarityRecord],
    b: &[SimilarityRecord],
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult, SemanticError> {
    if resamples == 0 {
        return Err(SemanticError::InvalidResamples);
    }
    let left = keyed_scores(a, "first")?;
    let right = keyed_scores(b, "second")?;
    if left.len() != right.len() || left.keys().ne(right.keys()) {
        let only_left: Vec<_> = left.keys().filter(|k| !right.contains_key(*k)).collect();
        let only_right: Vec<_> = right.keys().filter(|k| !left.contains_key(*k)).collect();
        return Err(SemanticError::KeyMismatch {
            detail: format!(
                "first-only verses {:?}, second-only verses {:?}",
                only_left, only_right
            ),
        });
    }
    let diffs: Vec<f64> = left
        .iter()
        .map(|(key, &score)| score - right[key])
        .collect();
    let observed = mean(&diffs);
    let centered: Vec<f64> = diffs.iter().map(|d| d - observed).collect();
    let n = centered.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += centered[rng.gen_range(0..n)];
        }
        if (sum / n as f64).abs() >= observed.abs() {
            at_least_as_extreme += 1;
        }
    }
    Ok(SignificanceResult {
        p_value: (at_least_as_extreme + 1) as f64 / (resamples + 1) as f64,
        mean_difference: observed,
        pairs: n,
        resamples,
        seed,
    })
}

fn keyed_scores(
    records: &[SimilarityRecord],
    side: &str,
) -> Result<BTreeMap<(u32, u32), f64>, SemanticError> {
    if records.is_empty() {
        return Err(SemanticError::EmptyInput);
    }
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert((r.chapter, r.verse), r.score).is_some() {
            return Err(SemanticError::KeyMismatch {
                detail: format!(
                    "{side} input has multiple records for verse {}:{}",
                    r.chapter, r.verse
                ),
            });
        }
    }
    Ok(map)
}

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine undefined for zero vector ({side} argument)")]
    ZeroVector { side: &'static str },
    #[error("provider failure at {chapter}:{verse} for version '{version}': {source}")]
    Provider {
        chapter: u32,
        verse: u32,
        version: VersionId,
        #[source]
        source: Box<ProviderError>,
    },
    #[error("similarity {score} at {chapter}:{verse} for '{version}' outside [-1, 1]")]
    ScoreOutOfBounds {
        chapter: u32,
        verse: u32,
        version: VersionId,
        score: f64,
    },
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("inter-chapter variation needs at least two chapters, found {found}")]
    InsufficientChapters { found: usize },
    #[error("paired inputs do not align: {detail}")]
    KeyMismatch { detail: String },
    #[error("resample count must be at least 1")]
    InvalidResamples,
}
