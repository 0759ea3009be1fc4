//! File exports: fixed names, fixed numeric precision, deterministic bytes.
//!
//! Similarity values print with 4 decimals, percentage-point values with 2.
//! CSV is comma-separated UTF-8 with a header row and LF endings. JSON uses
//! sorted keys and numbers rounded to the stated precision before
//! serialization, so two exports of the same run are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{CombinedAnalysis, Correlation, PerformanceTable, ReportError, RunManifest};
use crate::corpus::TextType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    /// Parses a `--formats` style list such as `"csv,json"`.
    pub fn parse_list(raw: &str) -> Result<Vec<ExportFormat>, ReportError> {
        let mut formats = Vec::new();
        for part in raw.split(',') {
            let format = match part.trim() {
                "csv" => ExportFormat::Csv,
                "json" => ExportFormat::Json,
                other => {
                    return Err(ReportError::InvalidMetric {
                        message: format!("unknown export format {other:?} (expected csv or json)"),
                    })
                }
            };
            if !formats.contains(&format) {
                formats.push(format);
            }
        }
        if formats.is_empty() {
            return Err(ReportError::InvalidMetric {
                message: "no export formats given".to_string(),
            });
        }
        Ok(formats)
    }
}

/// Similarity scores print with four decimals.
pub fn fmt_similarity(value: f64) -> String {
    format!("{value:.4}")
}

/// Percentage points print with two decimals.
pub fn fmt_pp(value: f64) -> String {
    format!("{value:.2}")
}

/// JSON number rounded to `decimals` places, so serialized output carries no
/// excess digits.
fn rounded_number(value: f64, decimals: usize) -> Value {
    let formatted = format!("{value:.decimals$}");
    formatted
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub corpus: String,
    pub version: String,
    pub chapter: u32,
    pub verse: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramRow {
    pub corpus: String,
    pub version: String,
    pub n: usize,
    pub rank: usize,
    pub ngram: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityRow {
    pub corpus: String,
    pub version: String,
    pub sentences: usize,
    pub positive_pct: f64,
    pub neutral_pct: f64,
    pub negative_pct: f64,
    /// Deviation from the expert distribution; the expert row has none.
    pub deviation_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeRow {
    pub corpus: String,
    pub direction: String,
    pub rank: usize,
    pub chapter: u32,
    pub verse: u32,
    pub mean_score: f64,
}

/// Everything one report export writes.
#[derive(Debug, Clone)]
pub struct RunExport {
    pub table: PerformanceTable,
    pub similarity: Vec<SimilarityRow>,
    pub ngrams: Vec<NgramRow>,
    pub polarity: Vec<PolarityRow>,
    pub extremes: Vec<ExtremeRow>,
    /// Combined similarity/sentiment analysis, one entry per corpus id.
    pub combined: Vec<(String, CombinedAnalysis)>,
    pub manifest: RunManifest,
}

/// Writes the full export set into `dir` and returns the written paths in
/// name order. The manifest is written regardless of the format list.
pub fn export_run(
    dir: &Path,
    run: &RunExport,
    formats: &[ExportFormat],
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|err| io_error(dir, &err))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ExportFormat::Csv => {
                written.push(write_file(&dir.join("performance_table.csv"), performance_csv(&run.table))?);
                written.push(write_file(&dir.join("similarity_records.csv"), similarity_csv(&run.similarity))?);
                written.push(write_file(&dir.join("ngram_top.csv"), ngram_csv(&run.ngrams))?);
                written.push(write_file(&dir.join("sentiment_polarity.csv"), polarity_csv(&run.polarity))?);
                written.push(write_file(&dir.join("extremes.csv"), extremes_csv(&run.extremes))?);
            }
            ExportFormat::Json => {
                written.push(write_file(&dir.join("performance_table.json"), pretty(&performance_json(&run.table)))?);
                written.push(write_file(&dir.join("similarity_records.json"), pretty(&similarity_json(&run.similarity)))?);
                written.push(write_file(&dir.join("ngram_top.json"), pretty(&ngram_json(&run.ngrams)))?);
                written.push(write_file(&dir.join("sentiment_polarity.json"), pretty(&polarity_json(&run.polarity)))?);
                written.push(write_file(&dir.join("extremes.json"), pretty(&extremes_json(&run.extremes)))?);
            }
        }
    }
    written.push(write_file(
        &dir.join("manifest.json"),
        pretty(&manifest_json(&run.manifest, &run.combined)),
    )?);
    written.sort();
    Ok(written)
}

fn write_file(path: &Path, content: String) -> Result<PathBuf, ReportError> {
    fs::write(path, content.as_bytes()).map_err(|err| io_error(path, &err))?;
    Ok(path.to_path_buf())
}

fn io_error(path: &Path, err: &std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

fn pretty(value: &Value) -> String {
    let mut rendered = serde_json::to_string_pretty(value).expect("export values serialize");
    rendered.push('\n');
    rendered
}

/// CSV-escapes one field: quotes only when the content requires it.
fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn csv_lines(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let escaped: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    out
}

fn table_rows(table: &PerformanceTable) -> Vec<(TextType, String)> {
    table
        .text_types()
        .flat_map(|text_type| {
            table
                .versions(text_type)
                .map(move |version| (text_type, version.as_str().to_string()))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn performance_csv(table: &PerformanceTable) -> String {
    use super::Metric;
    let rows = table_rows(table).into_iter().map(|(text_type, version)| {
        let id = crate::corpus::VersionId::new(&version).expect("table keys are valid ids");
        let cell = table.cell(text_type, &id).expect("row exists");
        vec![
            text_type.as_str().to_string(),
            version,
            fmt_similarity(cell.similarity),
            fmt_pp(cell.sentiment_deviation),
            fmt_pp(cell.variation_pp),
            table.is_best(text_type, &id, Metric::Similarity).to_string(),
            table.is_best(text_type, &id, Metric::SentimentDeviation).to_string(),
            table.is_best(text_type, &id, Metric::Variation).to_string(),
        ]
    });
    csv_lines(
        "text_type,version,similarity,sentiment_deviation_pp,variation_pp,best_similarity,best_sentiment_deviation,best_variation",
        rows,
    )
}

fn performance_json(table: &PerformanceTable) -> Value {
    use super::Metric;
    let rows: Vec<Value> = table_rows(table)
        .into_iter()
        .map(|(text_type, version)| {
            let id = crate::corpus::VersionId::new(&version).expect("table keys are valid ids");
            let cell = table.cell(text_type, &id).expect("row exists");
            json!({
                "text_type": text_type.as_str(),
                "version": version,
                "similarity": rounded_number(cell.similarity, 4),
                "sentiment_deviation_pp": rounded_number(cell.sentiment_deviation, 2),
                "variation_pp": rounded_number(cell.variation_pp, 2),
                "best_similarity": table.is_best(text_type, &id, Metric::Similarity),
                "best_sentiment_deviation": table.is_best(text_type, &id, Metric::SentimentDeviation),
                "best_variation": table.is_best(text_type, &id, Metric::Variation),
            })
        })
        .collect();
    Value::Array(rows)
}

fn similarity_csv(rows: &[SimilarityRow]) -> String {
    csv_lines(
        "corpus,version,chapter,verse,score",
        rows.iter().map(|r| {
            vec![
                r.corpus.clone(),
                r.version.clone(),
                r.chapter.to_string(),
                r.verse.to_string(),
                fmt_similarity(r.score),
            ]
        }),
    )
}

fn similarity_json(rows: &[SimilarityRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "corpus": r.corpus,
                    "version": r.version,
                    "chapter": r.chapter,
                    "verse": r.verse,
                    "score": rounded_number(r.score, 4),
                })
            })
            .collect(),
    )
}

fn ngram_csv(rows: &[NgramRow]) -> String {
    csv_lines(
        "corpus,version,n,rank,ngram,count",
        rows.iter().map(|r| {
            vec![
                r.corpus.clone(),
                r.version.clone(),
                r.n.to_string(),
                r.rank.to_string(),
                r.ngram.clone(),
                r.count.to_string(),
            ]
        }),
    )
}

fn ngram_json(rows: &[NgramRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "corpus": r.corpus,
                    "version": r.version,
                    "n": r.n,
                    "rank": r.rank,
                    "ngram": r.ngram,
                    "count": r.count,
                })
            })
            .collect(),
    )
}

fn polarity_csv(rows: &[PolarityRow]) -> String {
    csv_lines(
        "corpus,version,sentences,positive_pct,neutral_pct,negative_pct,deviation_pp",
        rows.iter().map(|r| {
            vec![
                r.corpus.clone(),
                r.version.clone(),
                r.sentences.to_string(),
                fmt_pp(r.positive_pct),
                fmt_pp(r.neutral_pct),
                fmt_pp(r.negative_pct),
                r.deviation_pp.map(fmt_pp).unwrap_or_default(),
            ]
        }),
    )
}

fn polarity_json(rows: &[PolarityRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "corpus": r.corpus,
                    "version": r.version,
                    "sentences": r.sentences,
                    "positive_pct": rounded_number(r.positive_pct, 2),
                    "neutral_pct": rounded_number(r.neutral_pct, 2),
                    "negative_pct": rounded_number(r.negative_pct, 2),
                    "deviation_pp": r.deviation_pp.map(|v| rounded_number(v, 2)).unwrap_or(Value::Null),
                })
            })
            .collect(),
    )
}

fn extremes_csv(rows: &[ExtremeRow]) -> String {
    csv_lines(
        "corpus,direction,rank,chapter,verse,mean_score",
        rows.iter().map(|r| {
            vec![
                r.corpus.clone(),
                r.direction.clone(),
                r.rank.to_string(),
                r.chapter.to_string(),
                r.verse.to_string(),
                fmt_similarity(r.mean_score),
            ]
        }),
    )
}

fn extremes_json(rows: &[ExtremeRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "corpus": r.corpus,
                    "direction": r.direction,
                    "rank": r.rank,
                    "chapter": r.chapter,
                    "verse": r.verse,
                    "mean_score": rounded_number(r.mean_score, 4),
                })
            })
            .collect(),
    )
}

fn manifest_json(manifest: &RunManifest, combined: &[(String, CombinedAnalysis)]) -> Value {
    let mut by_corpus = serde_json::Map::new();
    for (corpus, analysis) in combined {
        let block = json!({
            "correlation": match analysis.correlation {
                Correlation::Coefficient(rho) => rounded_number(rho, 4),
                Correlation::NotApplicable => Value::String("not_applicable".to_string()),
            },
            "records": analysis
                .records
                .iter()
                .map(|r| {
                    json!({
                        "version": r.version.as_str(),
                        "chapter": r.chapter,
                        "mean_similarity": rounded_number(r.mean_similarity, 4),
                        "sentiment_deviation_pp": rounded_number(r.sentiment_deviation, 2),
                    })
                })
                .collect::<Vec<_>>(),
        });
        by_corpus.insert(corpus.clone(), block);
    }
    json!({
        "combined_analysis": Value::Object(by_corpus),
        "run": serde_json::to_value(manifest).expect("manifest serializes"),
    })
}
