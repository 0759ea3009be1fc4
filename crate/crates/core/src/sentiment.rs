//! Nine-category sentence sentiment and polarity-level aggregation.
//!
//! Classifier scores are multi-label: every category at or above the
//! threshold is active, and when nothing reaches it the single best category
//! is used so no sentence goes unlabeled. Distributions aggregate label
//! instances, not sentences, so one sentence carrying two labels contributes
//! two instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VersionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionCategory {
    Optimistic,
    Thankful,
    Empathetic,
    Pessimistic,
    Anxious,
    Sad,
    Annoyed,
    Denial,
    Humour,
}

impl EmotionCategory {
    pub const ALL: [EmotionCategory; 9] = [
        EmotionCategory::Optimistic,
        EmotionCategory::Thankful,
        EmotionCategory::Empathetic,
        EmotionCategory::Pessimistic,
        EmotionCategory::Anxious,
        EmotionCategory::Sad,
        EmotionCategory::Annoyed,
        EmotionCategory::Denial,
        EmotionCategory::Humour,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionCategory::Optimistic => "optimistic",
            EmotionCategory::Thankful => "thankful",
            EmotionCategory::Empathetic => "empathetic",
            EmotionCategory::Pessimistic => "pessimistic",
            EmotionCategory::Anxious => "anxious",
            EmotionCategory::Sad => "sad",
            EmotionCategory::Annoyed => "annoyed",
            EmotionCategory::Denial => "denial",
            EmotionCategory::Humour => "humour",
        }
    }

    /// Case-insensitive parse; accepts the American spelling of humour.
    pub fn parse(name: &str) -> Option<EmotionCategory> {
        let lower = name.trim().to_lowercase();
        match lower.as_str() {
            "optimistic" => Some(EmotionCategory::Optimistic),
            "thankful" => Some(EmotionCategory::Thankful),
            "empathetic" => Some(EmotionCategory::Empathetic),
            "pessimistic" => Some(EmotionCategory::Pessimistic),
            "anxious" => Some(EmotionCategory::Anxious),
            "sad" => Some(EmotionCategory::Sad),
            "annoyed" => Some(EmotionCategory::Annoyed),
            "denial" => Some(EmotionCategory::Denial),
            "humour" | "humor" => Some(EmotionCategory::Humour),
            _ => None,
        }
    }

    pub fn polarity(&self) -> Polarity {
        match self {
            EmotionCategory::Optimistic | EmotionCategory::Thankful | EmotionCategory::Humour => {
                Polarity::Positive
            }
            EmotionCategory::Empathetic => Polarity::Neutral,
            EmotionCategory::Pessimistic
            | EmotionCategory::Anxious
            | EmotionCategory::Sad
            | EmotionCategory::Annoyed
            | EmotionCategory::Denial => Polarity::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

/// Complete score vector over all nine categories, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    values: [f64; 9],
}

impl EmotionScores {
    /// Validates completeness and range of a raw classifier score map.
    pub fn from_map(map: &BTreeMap<EmotionCategory, f64>) -> Result<Self, SentimentError> {
        let mut values = [0.0; 9];
        for (i, category) in EmotionCategory::ALL.iter().enumerate() {
            let value = *map
                .get(category)
                .ok_or(SentimentError::MissingCategory { category: *category })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(SentimentError::ScoreOutOfRange {
                    category: *category,
                    value,
                });
            }
            values[i] = value;
        }
        Ok(EmotionScores { values })
    }

    pub fn from_fn(f: impl Fn(EmotionCategory) -> f64) -> Result<Self, SentimentError> {
        Self::from_map(&EmotionCategory::ALL.iter().map(|&c| (c, f(c))).collect())
    }

    pub fn get(&self, category: EmotionCategory) -> f64 {
        let index = EmotionCategory::ALL
            .iter()
            .position(|c| *c == category)
            .expect("category covered");
        self.values[index]
    }
}

/// Labeling outcome for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceLabels {
    pub index: usize,
    pub scores: EmotionScores,
    pub active: BTreeSet<EmotionCategory>,
}

/// Activates every category scoring at least `threshold`; falls back to the
/// single highest-scoring category (first in declaration order on ties) so
/// the active set is never empty.
pub fn label_sentence(
    index: usize,
    scores: &BTreeMap<EmotionCategory, f64>,
    threshold: f64,
) -> Result<SentenceLabels, SentimentError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(SentimentError::InvalidThreshold { threshold });
    }
    let scores = EmotionScores::from_map(scores)?;
    let mut active: BTreeSet<EmotionCategory> = EmotionCategory::ALL
        .iter()
        .copied()
        .filter(|&c| scores.get(c) >= threshold)
        .collect();
    if active.is_empty() {
        let best = EmotionCategory::ALL
            .iter()
            .copied()
            .max_by(|a, b| scores.get(*a).total_cmp(&scores.get(*b)))
            .expect("nine categories");
        // max_by keeps the last maximum; scan in order for the first.
        let first = EmotionCategory::ALL
            .iter()
            .copied()
            .find(|&c| scores.get(c) == scores.get(best))
            .expect("maximum exists");
        active.insert(first);
    }
    Ok(SentenceLabels {
        index,
        scores,
        active,
    })
}

/// Label-instance counts and polarity percentages for one version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentDistribution {
    pub version: VersionId,
    pub sentence_count: usize,
    /// Sentences in which each category is active; keys cover all nine.
    pub category_counts: BTreeMap<EmotionCategory, u64>,
    /// Label instances per polarity.
    pub polarity_counts: BTreeMap<Polarity, u64>,
    /// Percentage of label instances per polarity; sums to 100.
    pub polarity_pct: BTreeMap<Polarity, f64>,
}

impl SentimentDistribution {
    pub fn pct(&self, polarity: Polarity) -> f64 {
        self.polarity_pct[&polarity]
    }

    /// Rebuilds the derived fields from raw polarity instance counts.
    /// Intended for loading persisted distributions and for tests.
    pub fn from_polarity_counts(
        version: VersionId,
        sentence_count: usize,
        counts: BTreeMap<Polarity, u64>,
    ) -> Result<Self, SentimentError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(SentimentError::EmptyInput);
        }
        let polarity_counts: BTreeMap<Polarity, u64> = Polarity::ALL
            .iter()
            .map(|&p| (p, counts.get(&p).copied().unwrap_or(0)))
            .collect();
        let polarity_pct = pct_of(&polarity_counts, total);
        Ok(SentimentDistribution {
            version,
            sentence_count,
            category_counts: EmotionCategory::ALL.iter().map(|&c| (c, 0)).collect(),
            polarity_counts,
            polarity_pct,
        })
    }
}

fn pct_of(counts: &BTreeMap<Polarity, u64>, total: u64) -> BTreeMap<Polarity, f64> {
    counts
        .iter()
        .map(|(&p, &c)| (p, 100.0 * c as f64 / total as f64))
        .collect()
}

/// Aggregates labeled sentences into a distribution for `version`.
pub fn aggregate_distribution(
    labels: &[SentenceLabels],
    version: VersionId,
) -> Result<SentimentDistribution, SentimentError> {
    if labels.is_empty() {
        return Err(SentimentError::EmptyInput);
    }
    let mut category_counts: BTreeMap<EmotionCategory, u64> =
        EmotionCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for labeled in labels {
        debug_assert!(!labeled.active.is_empty(), "labeling never leaves a sentence empty");
        for &category in &labeled.active {
            *category_counts.get_mut(&category).expect("all keys present") += 1;
        }
    }
    let mut polarity_counts: BTreeMap<Polarity, u64> =
        Polarity::ALL.iter().map(|&p| (p, 0)).collect();
    for (&category, &count) in &category_counts {
        *polarity_counts
            .get_mut(&category.polarity())
            .expect("all keys present") += count;
    }
    let total: u64 = polarity_counts.values().sum();
    let polarity_pct = pct_of(&polarity_counts, total);
    Ok(SentimentDistribution {
        version,
        sentence_count: labels.len(),
        category_counts,
        polarity_counts,
        polarity_pct,
    })
}

/// L1 distance between polarity percentage profiles, in percentage points.
///
/// Zero means identical profiles; the maximum, 200, means fully disjoint.
pub fn sentiment_deviation(system: &SentimentDistribution, expert: &SentimentDistribution) -> f64 {
    Polarity::ALL
        .iter()
        .map(|&p| (system.pct(p) - expert.pct(p)).abs())
        .sum()
}

#[derive(Debug, Error, PartialEq)]
pub enum SentimentError {
    #[error("classifier output lacks category '{}'", category.as_str())]
    MissingCategory { category: EmotionCategory },
    #[error("score {value} for '{}' outside [0, 1]", category.as_str())]
    ScoreOutOfRange { category: EmotionCategory, value: f64 },
    #[error("threshold {threshold} outside (0, 1)")]
    InvalidThreshold { threshold: f64 },
    #[error("cannot aggregate an empty label set")]
    EmptyInput,
}
