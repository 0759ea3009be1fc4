//! Summary assembly: the per-system performance table, the similarity/
//! sentiment combined analysis, and the run manifest that stamps every
//! export with enough detail to reproduce it byte-identically.

pub mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TextType, VersionId};
use crate::providers::ProviderConfig;
use crate::semantic::{corpus_means, inter_chapter_variation, ChapterSummary, SemanticError};

/// Columns of the performance table, each with a fixed "better" direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Similarity,
    SentimentDeviation,
    Variation,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Similarity, Metric::SentimentDeviation, Metric::Variation];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Similarity => "similarity",
            Metric::SentimentDeviation => "sentiment_deviation",
            Metric::Variation => "variation",
        }
    }

    /// Similarity rewards high values; both deviation metrics reward low.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Metric::Similarity)
    }
}

/// One system's numbers for one text type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCell {
    pub similarity: f64,
    pub sentiment_deviation: f64,
    pub variation_pp: f64,
}

impl PerformanceCell {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Similarity => self.similarity,
            Metric::SentimentDeviation => self.sentiment_deviation,
            Metric::Variation => self.variation_pp,
        }
    }
}

/// Everything the table builder needs for one text type.
#[derive(Debug, Clone)]
pub struct PerformanceInputs {
    pub text_type: TextType,
    /// Chapter-level similarity summaries covering every candidate version.
    pub summaries: Vec<ChapterSummary>,
    /// Sentiment deviation from the expert translation, percentage points.
    pub deviations: BTreeMap<VersionId, f64>,
}

/// Per-(text type, system) metric grid with best-per-column markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    rows: BTreeMap<TextType, BTreeMap<VersionId, PerformanceCell>>,
}

impl PerformanceTable {
    pub fn text_types(&self) -> impl Iterator<Item = TextType> + '_ {
        self.rows.keys().copied()
    }

    pub fn versions(&self, text_type: TextType) -> impl Iterator<Item = &VersionId> {
        self.rows.get(&text_type).into_iter().flat_map(|row| row.keys())
    }

    pub fn cell(&self, text_type: TextType, version: &VersionId) -> Option<&PerformanceCell> {
        self.rows.get(&text_type)?.get(version)
    }

    /// Best value for one column: maximum for similarity, minimum otherwise.
    pub fn best_value(&self, text_type: TextType, metric: Metric) -> Option<f64> {
        let cells = self.rows.get(&text_type)?.values();
        let values = cells.map(|cell| cell.get(metric));
        if metric.higher_is_better() {
            values.max_by(f64::total_cmp)
        } else {
            values.min_by(f64::total_cmp)
        }
    }

    /// True when this cell holds the column extremum. Ties all count.
    pub fn is_best(&self, text_type: TextType, version: &VersionId, metric: Metric) -> bool {
        match (self.cell(text_type, version), self.best_value(text_type, metric)) {
            (Some(cell), Some(best)) => cell.get(metric) == best,
            _ => false,
        }
    }

    /// Similarity gap between two text types for one system, in percentage
    /// points. The headline cross-genre drop is a per-system statistic.
    pub fn similarity_gap(
        &self,
        version: &VersionId,
        from: TextType,
        to: TextType,
    ) -> Option<f64> {
        let a = self.cell(from, version)?.similarity;
        let b = self.cell(to, version)?.similarity;
        Some((a - b) * 100.0)
    }
}

/// Builds the table from per-text-type similarity summaries and sentiment
/// deviations. Every version present in the summaries needs a deviation and
/// at least two chapters (for the variation column).
pub fn build_performance_table(
    inputs: &[PerformanceInputs],
) -> Result<PerformanceTable, ReportError> {
    let mut rows: BTreeMap<TextType, BTreeMap<VersionId, PerformanceCell>> = BTreeMap::new();
    for input in inputs {
        let missing = |metric: Metric, version: &VersionId| ReportError::MissingInput {
            metric: metric.as_str().to_string(),
            version: version.clone(),
            text_type: input.text_type,
        };
        let means = corpus_means(&input.summaries);
        let mut row = BTreeMap::new();
        for (version, similarity) in means {
            let variation_pp = match inter_chapter_variation(&input.summaries, &version) {
                Ok(value) => value,
                Err(SemanticError::InsufficientChapters { .. }) => {
                    return Err(missing(Metric::Variation, &version));
                }
                Err(err) => {
                    return Err(ReportError::InvalidMetric { message: err.to_string() });
                }
            };
            let sentiment_deviation = *input
                .deviations
                .get(&version)
                .ok_or_else(|| missing(Metric::SentimentDeviation, &version))?;
            let cell = PerformanceCell { similarity, sentiment_deviation, variation_pp };
            validate_cell(&cell, input.text_type, &version)?;
            row.insert(version, cell);
        }
        if row.is_empty() {
            return Err(ReportError::InvalidMetric {
                message: format!("{}: no versions to tabulate", input.text_type.as_str()),
            });
        }
        rows.insert(input.text_type, row);
    }
    if rows.is_empty() {
        return Err(ReportError::InvalidMetric {
            message: "no text types to tabulate".to_string(),
        });
    }
    Ok(PerformanceTable { rows })
}

fn validate_cell(
    cell: &PerformanceCell,
    text_type: TextType,
    version: &VersionId,
) -> Result<(), ReportError> {
    let fail = |what: &str, value: f64| {
        Err(ReportError::InvalidMetric {
            message: format!(
                "{}/{}: {what} {value} out of range",
                text_type.as_str(),
                version.as_str()
            ),
        })
    };
    if !(-1.0..=1.0).contains(&cell.similarity) || !cell.similarity.is_finite() {
        return fail("similarity", cell.similarity);
    }
    if !(0.0..=200.0).contains(&cell.sentiment_deviation) {
        return fail("sentiment deviation", cell.sentiment_deviation);
    }
    if !(cell.variation_pp >= 0.0) || !cell.variation_pp.is_finite() {
        return fail("variation", cell.variation_pp);
    }
    Ok(())
}

/// Rank correlation outcome. Fewer than two records carry no signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    Coefficient(f64),
    NotApplicable,
}

/// Spearman rank correlation with average ranks on ties. A constant input
/// has no ordering signal and reports 0 by convention.
pub fn spearman(pairs: &[(f64, f64)]) -> Correlation {
    if pairs.len() < 2 {
        return Correlation::NotApplicable;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mean) * (y - mean);
        var_x += (x - mean).powi(2);
        var_y += (y - mean).powi(2);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Correlation::Coefficient(0.0);
    }
    Correlation::Coefficient(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// 1-based ranks; tied values share the average of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end are tied; each gets the mean 1-based rank.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &index in &order[start..end] {
            ranks[index] = rank;
        }
        start = end;
    }
    ranks
}

/// One joined (version, chapter) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRecord {
    pub version: VersionId,
    pub chapter: u32,
    pub mean_similarity: f64,
    pub sentiment_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedAnalysis {
    pub records: Vec<CombinedRecord>,
    pub correlation: Correlation,
}

/// Joins chapter-level similarity with chapter-level sentiment deviation per
/// (version, chapter) key and correlates the two across all joined records.
pub fn combined_analysis(
    similarity: &BTreeMap<(VersionId, u32), f64>,
    deviation: &BTreeMap<(VersionId, u32), f64>,
) -> Result<CombinedAnalysis, ReportError> {
    let mut records = Vec::new();
    for ((version, chapter), &mean_similarity) in similarity {
        if let Some(&sentiment_deviation) = deviation.get(&(version.clone(), *chapter)) {
            records.push(CombinedRecord {
                version: version.clone(),
                chapter: *chapter,
                mean_similarity,
                sentiment_deviation,
            });
        }
    }
    if records.is_empty() {
        return Err(ReportError::NoOverlap);
    }
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.mean_similarity, r.sentiment_deviation))
        .collect();
    Ok(CombinedAnalysis {
        records,
        correlation: spearman(&pairs),
    })
}

/// Corpus shape stamped into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStamp {
    pub id: String,
    pub text_type: TextType,
    pub chapters: usize,
    pub units: usize,
}

/// Provider identity stamped into the manifest. Carries the auth variable
/// *name*, never its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderStamp {
    pub name: String,
    pub kind: String,
    pub dialect: String,
    pub endpoint: String,
    pub model: String,
    pub auth_env: Option<String>,
    pub system_prompt: Option<String>,
}

impl From<&ProviderConfig> for ProviderStamp {
    fn from(config: &ProviderConfig) -> ProviderStamp {
        ProviderStamp {
            name: config.name.clone(),
            kind: config.kind.as_str().to_string(),
            dialect: config.dialect.as_str().to_string(),
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            auth_env: config.auth_env.clone(),
            system_prompt: config.system_prompt.clone(),
        }
    }
}

/// Reproduction stamp written with every export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: String,
    pub corpora: Vec<CorpusStamp>,
    pub providers: Vec<ProviderStamp>,
    pub stoplist_sha256: String,
    pub segmentation_rules: String,
    pub seed: u64,
    pub resamples: u32,
    pub sentiment_threshold: f64,
    pub granularity: String,
    pub comma_splits: bool,
}

/// UTC timestamp for manifests. `SOURCE_DATE_EPOCH`, when set, pins the
/// value so a rerun produces byte-identical files.
pub fn manifest_timestamp() -> String {
    let seconds = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|raw| raw.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    format_utc(seconds)
}

fn format_utc(epoch_seconds: i64) -> String {
    let days = epoch_seconds.div_euclid(86_400);
    let secs_of_day = epoch_seconds.rem_euclid(86_400);
    let (year, month, day) = civil_from_days(days);
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        year,
        month,
        day,
        secs_of_day / 3600,
        (secs_of_day % 3600) / 60,
        secs_of_day % 60
    )
}

/// Gregorian date from days since 1970-01-01 (Hinnant's civil-from-days).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1_460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if month <= 2 { year + 1 } else { year }, month, day)
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing {metric} for {version} ({text_type})", version = .version.as_str(), text_type = .text_type.as_str())]
    MissingInput {
        metric: String,
        version: VersionId,
        text_type: TextType,
    },
    #[error("no overlapping (version, chapter) keys between similarity and sentiment inputs")]
    NoOverlap,
    #[error("invalid metric value: {message}")]
    InvalidMetric { message: String },
    #[error("write failed at {path}: {message}")]
    Io { path: String, message: String },
}
