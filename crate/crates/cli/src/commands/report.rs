//! Folds per-corpus analyze artifacts into the final export set: the
//! performance table, record-level CSVs, combined analysis, and manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use transeval_core::corpus::VersionId;
use transeval_core::report::export::{
    export_run, ExportFormat, ExtremeRow, NgramRow, PolarityRow, RunExport, SimilarityRow,
};
use transeval_core::report::{
    build_performance_table, combined_analysis, manifest_timestamp, CombinedAnalysis, Metric,
    PerformanceInputs, PerformanceTable, ProviderStamp, ReportError, RunManifest,
};
use transeval_core::sentiment::Polarity;

use crate::artifacts::{
    self, MetaArtifact, NgramArtifact, SentimentArtifact, SimilarityArtifact,
};
use crate::emit::Emitter;

use super::{CliError, Settings, Stage};

/// Subdirectory of the run directory receiving the export files.
const REPORT_SUBDIR: &str = "report";

struct CorpusArtifacts {
    meta: MetaArtifact,
    similarity: SimilarityArtifact,
    sentiment: SentimentArtifact,
    ngrams: Option<NgramArtifact>,
}

pub fn run(settings: &Settings, emit: &Emitter) -> Result<(), CliError> {
    let out = settings.require_out()?;
    let report_dir = out.join(REPORT_SUBDIR);

    if settings.dry_run {
        plan(settings, emit, &report_dir);
        return Ok(());
    }

    let corpus_dirs = discover_corpus_dirs(out)?;
    let mut loaded = Vec::new();
    for dir in &corpus_dirs {
        loaded.push(load_corpus(settings, dir)?);
    }

    let export = assemble(&loaded)?;
    let written = export_run(&report_dir, &export, &settings.formats).map_err(report_error)?;

    render_table(emit, &export.table);
    for path in &written {
        emit.result(
            &format!("wrote {}", path.display()),
            json!({"event": "export", "path": path.display().to_string()}),
        );
    }
    Ok(())
}

fn plan(settings: &Settings, emit: &Emitter, report_dir: &Path) {
    let stems = [
        "performance_table",
        "similarity_records",
        "ngram_top",
        "sentiment_polarity",
        "extremes",
    ];
    let mut names = Vec::new();
    for format in &settings.formats {
        let ext = match format {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        };
        for stem in stems {
            names.push(format!("{stem}.{ext}"));
        }
    }
    names.push("manifest.json".to_string());
    for name in names {
        emit.result(
            &format!("would write {}", report_dir.join(&name).display()),
            json!({
                "event": "plan",
                "action": "report",
                "path": report_dir.join(&name).display().to_string(),
            }),
        );
    }
}

/// Run-directory subdirectories holding a meta artifact, in name order.
fn discover_corpus_dirs(out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let missing = || CliError::MissingArtifact(out.join(artifacts::META_FILE));
    let entries = fs::read_dir(out).map_err(|_| missing())?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|path| path.join(artifacts::META_FILE).is_file())
        .collect();
    if dirs.is_empty() {
        return Err(missing());
    }
    dirs.sort();
    Ok(dirs)
}

fn load_corpus(settings: &Settings, dir: &Path) -> Result<CorpusArtifacts, CliError> {
    Ok(CorpusArtifacts {
        meta: artifacts::read_artifact(dir, artifacts::META_FILE)?,
        similarity: artifacts::read_artifact(dir, artifacts::SIMILARITY_FILE)?,
        sentiment: artifacts::read_artifact(dir, artifacts::SENTIMENT_FILE)?,
        ngrams: if settings.skip.contains(&Stage::Ngrams) {
            None
        } else {
            Some(artifacts::read_artifact(dir, artifacts::NGRAMS_FILE)?)
        },
    })
}

fn assemble(loaded: &[CorpusArtifacts]) -> Result<RunExport, CliError> {
    let inputs: Vec<PerformanceInputs> = loaded
        .iter()
        .map(|c| PerformanceInputs {
            text_type: c.similarity.text_type,
            summaries: c.similarity.chapter_summaries.clone(),
            deviations: c.sentiment.deviations_pp.clone(),
        })
        .collect();
    let table = build_performance_table(&inputs).map_err(report_error)?;

    let mut similarity = Vec::new();
    let mut ngrams = Vec::new();
    let mut polarity = Vec::new();
    let mut extremes = Vec::new();
    let mut combined: Vec<(String, CombinedAnalysis)> = Vec::new();

    for c in loaded {
        let corpus = c.meta.corpus.id.clone();
        for record in &c.similarity.records {
            similarity.push(SimilarityRow {
                corpus: corpus.clone(),
                version: record.version.as_str().to_string(),
                chapter: record.chapter,
                verse: record.verse,
                score: record.score,
            });
        }
        if let Some(tables) = &c.ngrams {
            for (version, blocks) in &tables.tables {
                for block in blocks {
                    for (i, entry) in block.top.iter().enumerate() {
                        ngrams.push(NgramRow {
                            corpus: corpus.clone(),
                            version: version.as_str().to_string(),
                            n: block.n,
                            rank: i + 1,
                            ngram: entry.ngram.clone(),
                            count: entry.count,
                        });
                    }
                }
            }
        }
        for (version, dist) in &c.sentiment.distributions {
            polarity.push(PolarityRow {
                corpus: corpus.clone(),
                version: version.as_str().to_string(),
                sentences: dist.sentence_count,
                positive_pct: dist.pct(Polarity::Positive),
                neutral_pct: dist.pct(Polarity::Neutral),
                negative_pct: dist.pct(Polarity::Negative),
                deviation_pp: c.sentiment.deviations_pp.get(version).copied(),
            });
        }
        for (direction, list) in [
            ("lowest", &c.similarity.extremes_lowest),
            ("highest", &c.similarity.extremes_highest),
        ] {
            for (i, extreme) in list.iter().enumerate() {
                extremes.push(ExtremeRow {
                    corpus: corpus.clone(),
                    direction: direction.to_string(),
                    rank: i + 1,
                    chapter: extreme.chapter,
                    verse: extreme.verse,
                    mean_score: extreme.mean_score,
                });
            }
        }
        combined.push((corpus, combined_corpus(c)?));
    }

    Ok(RunExport {
        table,
        similarity,
        ngrams,
        polarity,
        extremes,
        combined,
        manifest: manifest(loaded),
    })
}

/// Joins chapter-level similarity means with chapter-level sentiment
/// deviations for one corpus.
fn combined_corpus(c: &CorpusArtifacts) -> Result<CombinedAnalysis, CliError> {
    let mut sim: BTreeMap<(VersionId, u32), f64> = BTreeMap::new();
    for summary in &c.similarity.chapter_summaries {
        for (version, mean) in &summary.version_means {
            sim.insert((version.clone(), summary.chapter), *mean);
        }
    }
    let mut dev: BTreeMap<(VersionId, u32), f64> = BTreeMap::new();
    for (version, per_chapter) in &c.sentiment.chapter_deviations_pp {
        for (chapter, value) in per_chapter {
            dev.insert((version.clone(), *chapter), *value);
        }
    }
    combined_analysis(&sim, &dev).map_err(report_error)
}

/// Merged run manifest. Stage settings come from the analyze metadata of the
/// first corpus, so the manifest describes the run that produced the
/// artifacts rather than the report invocation.
fn manifest(loaded: &[CorpusArtifacts]) -> RunManifest {
    let first = &loaded[0].meta;
    let mut providers: BTreeMap<String, ProviderStamp> = BTreeMap::new();
    for c in loaded {
        for stamp in &c.meta.providers {
            providers.entry(stamp.name.clone()).or_insert_with(|| stamp.clone());
        }
    }
    RunManifest {
        created_at: manifest_timestamp(),
        corpora: loaded.iter().map(|c| c.meta.corpus.clone()).collect(),
        providers: providers.into_values().collect(),
        stoplist_sha256: first.stoplist_sha256.clone(),
        segmentation_rules: first.segmentation_rules.clone(),
        seed: first.seed,
        resamples: first.resamples,
        sentiment_threshold: first.sentiment_threshold,
        granularity: first.granularity.clone(),
        comma_splits: first.comma_splits,
    }
}

/// Prints the performance grid on stderr, best cell per column starred.
fn render_table(emit: &Emitter, table: &PerformanceTable) {
    emit.note(&format!(
        "{:<10} {:<10} {:>12} {:>16} {:>14}",
        "text_type", "version", "similarity", "deviation_pp", "variation_pp"
    ));
    for text_type in table.text_types() {
        for version in table.versions(text_type) {
            let cell = table
                .cell(text_type, version)
                .expect("table iterators only yield populated cells");
            let mark = |metric: Metric| {
                if table.is_best(text_type, version, metric) {
                    "*"
                } else {
                    " "
                }
            };
            emit.note(&format!(
                "{:<10} {:<10} {:>11.4}{} {:>15.2}{} {:>13.2}{}",
                text_type.as_str(),
                version.as_str(),
                cell.similarity,
                mark(Metric::Similarity),
                cell.sentiment_deviation,
                mark(Metric::SentimentDeviation),
                cell.variation_pp,
                mark(Metric::Variation),
            ));
        }
    }
}

fn report_error(error: ReportError) -> CliError {
    match error {
        ReportError::Io { .. } => CliError::Internal(error.to_string()),
        _ => CliError::Validation(error.to_string()),
    }
}
