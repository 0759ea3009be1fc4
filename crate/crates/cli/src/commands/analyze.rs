//! Runs every metric stage over ingested corpora and writes the per-corpus
//! JSON artifacts the report stage consumes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use transeval_core::corpus::{
    ingest_corpus, segment_sentences, sentence_counts, Corpus, Language, VersionId,
    SEGMENTATION_RULES_VERSION,
};
use transeval_core::lexical::{
    ngram_counts_by_sentence, remove_stopwords, tokenize, top_k, Stoplist, TokenStream,
};
use transeval_core::providers::{Provider, SentimentScorer};
use transeval_core::report::{CorpusStamp, ProviderStamp};
use transeval_core::semantic::{
    chapter_means, corpus_means, extremes, inter_chapter_variation, score_corpus,
    significance_test, ExtremeDirection, SemanticError, SimilarityRecord,
};
use transeval_core::sentiment::{
    aggregate_distribution, label_sentence, sentiment_deviation, SentenceLabels,
    SentimentDistribution,
};
use transeval_core::tokenmatch::{score_pair, MatchStrategy, TokenMatchError, TokenMatchScore};

use crate::artifacts::{
    self, MetaArtifact, NgramArtifact, NgramBlock, NgramEntry, SentenceCountsArtifact,
    SentimentArtifact, SignificanceArtifact, SignificancePair, SimilarityArtifact,
    TokenMatchArtifact,
};
use crate::config::{ProfileFile, Runtime};
use crate::emit::Emitter;

use super::{CliError, Granularity, Settings, Stage};

const NGRAM_SIZES: [usize; 3] = [1, 2, 3];
const NGRAM_TOP_K: usize = 20;
const EXTREME_COUNT: usize = 5;

pub fn run(settings: &Settings, emit: &Emitter) -> Result<(), CliError> {
    let corpora = settings.require_corpora()?;
    let out = settings.require_out()?.clone();
    let profile = ProfileFile::load(settings.require_providers()?)?;
    let runtime = Runtime::from_profile(&profile, settings.cache.as_deref())?;
    let embedder = runtime.embeddings.as_ref().ok_or_else(|| {
        CliError::Usage("analyze needs an embeddings provider; set [roles] embeddings".to_string())
    })?;
    let stamps: Vec<ProviderStamp> = profile
        .provider_configs()?
        .iter()
        .map(ProviderStamp::from)
        .collect();

    for dir in corpora {
        let corpus = ingest_corpus(dir).map_err(|e| CliError::Validation(e.to_string()))?;
        if corpus.unit_count() == 0 {
            return Err(CliError::Validation(format!(
                "corpus {} has no aligned units",
                dir.display()
            )));
        }
        let corpus_dir = out.join(&corpus.id);
        if settings.dry_run {
            plan(settings, emit, &corpus, &corpus_dir);
            continue;
        }
        analyze_corpus(settings, emit, &runtime, embedder, &stamps, &corpus, &corpus_dir)?;
    }
    Ok(())
}

fn plan(settings: &Settings, emit: &Emitter, corpus: &Corpus, corpus_dir: &Path) {
    let mut names = vec![artifacts::SIMILARITY_FILE, artifacts::SENTENCE_COUNTS_FILE];
    if !settings.skip.contains(&Stage::Ngrams) {
        names.push(artifacts::NGRAMS_FILE);
    }
    if !settings.skip.contains(&Stage::Sentiment) {
        names.push(artifacts::SENTIMENT_FILE);
    }
    if !settings.skip.contains(&Stage::TokenMatch) {
        names.push(artifacts::TOKENMATCH_FILE);
    }
    if !settings.skip.contains(&Stage::Significance) && corpus.candidate_versions.len() >= 2 {
        names.push(artifacts::SIGNIFICANCE_FILE);
    }
    names.push(artifacts::META_FILE);
    for name in names {
        emit.result(
            &format!("would write {}", corpus_dir.join(name).display()),
            json!({
                "event": "plan",
                "action": "analyze",
                "path": corpus_dir.join(name).display().to_string(),
            }),
        );
    }
}

fn analyze_corpus(
    settings: &Settings,
    emit: &Emitter,
    runtime: &Runtime,
    embedder: &Provider,
    stamps: &[ProviderStamp],
    corpus: &Corpus,
    corpus_dir: &Path,
) -> Result<(), CliError> {
    let mut written: Vec<PathBuf> = Vec::new();

    emit.note(&format!("scoring semantic similarity for {}", corpus.id));
    let scores = score_corpus(corpus, embedder).map_err(semantic_error)?;
    let summaries = chapter_means(&scores.records).map_err(semantic_error)?;
    let means = corpus_means(&summaries);
    let mut variation = BTreeMap::new();
    if corpus.chapters.len() >= 2 {
        for version in &corpus.candidate_versions {
            let value = inter_chapter_variation(&summaries, version).map_err(semantic_error)?;
            variation.insert(version.clone(), value);
        }
    }
    let similarity = SimilarityArtifact {
        corpus: corpus.id.clone(),
        text_type: corpus.text_type,
        chapters: corpus.chapters.len(),
        units: corpus.unit_count(),
        extremes_lowest: extremes(&scores.records, EXTREME_COUNT, ExtremeDirection::Lowest)
            .map_err(semantic_error)?,
        extremes_highest: extremes(&scores.records, EXTREME_COUNT, ExtremeDirection::Highest)
            .map_err(semantic_error)?,
        records: scores.records,
        skipped: scores.skipped,
        chapter_summaries: summaries,
        corpus_means: means,
        variation_pp: variation,
    };
    written.push(artifacts::write_artifact(
        corpus_dir,
        artifacts::SIMILARITY_FILE,
        &similarity,
    )?);

    if !settings.skip.contains(&Stage::Ngrams) {
        written.push(artifacts::write_artifact(
            corpus_dir,
            artifacts::NGRAMS_FILE,
            &ngram_artifact(settings, corpus)?,
        )?);
    }

    if !settings.skip.contains(&Stage::Sentiment) {
        let scorer = runtime.sentiment.as_ref().ok_or_else(|| {
            CliError::Usage(
                "analyze needs a sentiment provider; set [roles] sentiment \
                 or pass --skip sentiment"
                    .to_string(),
            )
        })?;
        written.push(artifacts::write_artifact(
            corpus_dir,
            artifacts::SENTIMENT_FILE,
            &sentiment_artifact(settings, corpus, scorer)?,
        )?);
    }

    if !settings.skip.contains(&Stage::TokenMatch) {
        let token_embedder = runtime.token_embeddings.as_ref().ok_or_else(|| {
            CliError::Usage(
                "analyze needs a token embedding provider; set [roles] embeddings \
                 or pass --skip tokenmatch"
                    .to_string(),
            )
        })?;
        written.push(artifacts::write_artifact(
            corpus_dir,
            artifacts::TOKENMATCH_FILE,
            &tokenmatch_artifact(corpus, token_embedder)?,
        )?);
    }

    if !settings.skip.contains(&Stage::Significance) && corpus.candidate_versions.len() >= 2 {
        written.push(artifacts::write_artifact(
            corpus_dir,
            artifacts::SIGNIFICANCE_FILE,
            &significance_artifact(settings, corpus, &similarity.records)?,
        )?);
    }

    let counts = sentence_counts(corpus, &settings.segment_options())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    written.push(artifacts::write_artifact(
        corpus_dir,
        artifacts::SENTENCE_COUNTS_FILE,
        &SentenceCountsArtifact {
            corpus: corpus.id.clone(),
            counts,
        },
    )?);

    let meta = MetaArtifact {
        corpus: CorpusStamp {
            id: corpus.id.clone(),
            text_type: corpus.text_type,
            chapters: corpus.chapters.len(),
            units: corpus.unit_count(),
        },
        providers: stamps.to_vec(),
        seed: settings.seed,
        resamples: settings.resamples,
        sentiment_threshold: settings.threshold,
        granularity: settings.granularity.as_str().to_string(),
        comma_splits: settings.comma_splits,
        segmentation_rules: SEGMENTATION_RULES_VERSION.to_string(),
        stoplist_sha256: Stoplist::english_content_hash(),
    };
    written.push(artifacts::write_artifact(
        corpus_dir,
        artifacts::META_FILE,
        &meta,
    )?);

    for path in &written {
        emit.result(
            &format!("wrote {}", path.display()),
            json!({"event": "artifact", "path": path.display().to_string()}),
        );
    }
    Ok(())
}

/// Sentence-level token streams for one version, stopwords removed.
fn content_streams(
    settings: &Settings,
    corpus: &Corpus,
    version: &VersionId,
) -> Result<Vec<TokenStream>, CliError> {
    let stoplist = Stoplist::english();
    let mut streams = Vec::new();
    for unit in corpus.units() {
        let text = unit
            .text_of(version)
            .expect("validated corpus covers every version");
        let segmented = segment_sentences(text, Language::English, &settings.segment_options())
            .map_err(|e| CliError::Validation(e.to_string()))?;
        for sentence in &segmented.sentences {
            streams.push(remove_stopwords(&tokenize(sentence), stoplist));
        }
    }
    Ok(streams)
}

fn ngram_artifact(settings: &Settings, corpus: &Corpus) -> Result<NgramArtifact, CliError> {
    let mut tables = BTreeMap::new();
    for version in corpus.versions() {
        let streams = content_streams(settings, corpus, &version)?;
        let mut blocks = Vec::new();
        for n in NGRAM_SIZES {
            let table = ngram_counts_by_sentence(streams.iter(), n)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let top = top_k(&table, NGRAM_TOP_K)
                .into_iter()
                .map(|(ngram, count)| NgramEntry {
                    ngram: ngram.join(" "),
                    count,
                })
                .collect();
            blocks.push(NgramBlock {
                n,
                total: table.total(),
                distinct: table.distinct(),
                top,
            });
        }
        tables.insert(version, blocks);
    }
    Ok(NgramArtifact {
        corpus: corpus.id.clone(),
        top_k: NGRAM_TOP_K,
        tables,
    })
}

/// Sentences of one version, each tagged with its chapter.
fn sentiment_units(
    settings: &Settings,
    corpus: &Corpus,
    version: &VersionId,
) -> Result<Vec<(u32, String)>, CliError> {
    let mut out = Vec::new();
    for unit in corpus.units() {
        let text = unit
            .text_of(version)
            .expect("validated corpus covers every version");
        match settings.granularity {
            Granularity::Verse => out.push((unit.chapter, text.to_string())),
            // Paragraph breaks inside a verse are stored as newlines.
            Granularity::Paragraph => {
                for paragraph in text.split('\n').filter(|p| !p.trim().is_empty()) {
                    out.push((unit.chapter, paragraph.to_string()));
                }
            }
            Granularity::Sentence => {
                let segmented =
                    segment_sentences(text, Language::English, &settings.segment_options())
                        .map_err(|e| CliError::Validation(e.to_string()))?;
                for sentence in segmented.sentences {
                    out.push((unit.chapter, sentence));
                }
            }
        }
    }
    Ok(out)
}

fn sentiment_artifact(
    settings: &Settings,
    corpus: &Corpus,
    scorer: &Provider,
) -> Result<SentimentArtifact, CliError> {
    let mut distributions: BTreeMap<VersionId, SentimentDistribution> = BTreeMap::new();
    let mut chapter_distributions: BTreeMap<VersionId, BTreeMap<u32, SentimentDistribution>> =
        BTreeMap::new();

    for version in corpus.versions() {
        let units = sentiment_units(settings, corpus, &version)?;
        let texts: Vec<&str> = units.iter().map(|(_, s)| s.as_str()).collect();
        let scores = scorer
            .classify(&texts)
            .map_err(|e| CliError::AnalyzeProvider(e.to_string()))?;
        let mut labels: Vec<SentenceLabels> = Vec::with_capacity(scores.len());
        for (index, score_map) in scores.iter().enumerate() {
            labels.push(
                label_sentence(index, score_map, settings.threshold)
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            );
        }
        let mut by_chapter: BTreeMap<u32, Vec<SentenceLabels>> = BTreeMap::new();
        for ((chapter, _), label) in units.iter().zip(labels.iter()) {
            by_chapter.entry(*chapter).or_default().push(label.clone());
        }
        distributions.insert(
            version.clone(),
            aggregate_distribution(&labels, version.clone())
                .map_err(|e| CliError::Validation(e.to_string()))?,
        );
        let mut per_chapter = BTreeMap::new();
        for (chapter, chapter_labels) in by_chapter {
            per_chapter.insert(
                chapter,
                aggregate_distribution(&chapter_labels, version.clone())
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            );
        }
        chapter_distributions.insert(version, per_chapter);
    }

    let expert = VersionId::expert();
    let expert_dist = &distributions[&expert];
    let mut deviations_pp = BTreeMap::new();
    let mut chapter_deviations_pp: BTreeMap<VersionId, BTreeMap<u32, f64>> = BTreeMap::new();
    for version in &corpus.candidate_versions {
        deviations_pp.insert(
            version.clone(),
            sentiment_deviation(&distributions[version], expert_dist),
        );
        let expert_chapters = &chapter_distributions[&expert];
        let mut per_chapter = BTreeMap::new();
        for (chapter, dist) in &chapter_distributions[version] {
            per_chapter.insert(*chapter, sentiment_deviation(dist, &expert_chapters[chapter]));
        }
        chapter_deviations_pp.insert(version.clone(), per_chapter);
    }

    Ok(SentimentArtifact {
        corpus: corpus.id.clone(),
        granularity: settings.granularity.as_str().to_string(),
        threshold: settings.threshold,
        distributions,
        deviations_pp,
        chapter_deviations_pp,
    })
}

fn tokenmatch_artifact(
    corpus: &Corpus,
    token_embedder: &Provider,
) -> Result<TokenMatchArtifact, CliError> {
    let strategy = MatchStrategy::PerToken;
    let mut means = BTreeMap::new();
    for version in &corpus.candidate_versions {
        let mut sum = (0.0, 0.0, 0.0);
        let mut scored_units = 0usize;
        for unit in corpus.units() {
            let candidate = unit
                .text_of(version)
                .expect("validated corpus covers every version");
            let score = score_pair(&unit.reference_en, candidate, token_embedder, strategy)
                .map_err(tokenmatch_error)?;
            sum = (sum.0 + score.precision, sum.1 + score.recall, sum.2 + score.f1);
            scored_units += 1;
        }
        let n = scored_units as f64;
        means.insert(
            version.clone(),
            TokenMatchScore {
                precision: sum.0 / n,
                recall: sum.1 / n,
                f1: sum.2 / n,
            },
        );
    }
    Ok(TokenMatchArtifact {
        corpus: corpus.id.clone(),
        strategy,
        units: corpus.unit_count(),
        means,
    })
}

fn significance_artifact(
    settings: &Settings,
    corpus: &Corpus,
    records: &[SimilarityRecord],
) -> Result<SignificanceArtifact, CliError> {
    let per_version = |version: &VersionId| -> Vec<SimilarityRecord> {
        records
            .iter()
            .filter(|r| &r.version == version)
            .cloned()
            .collect()
    };
    let mut pairs = Vec::new();
    let versions = &corpus.candidate_versions;
    for i in 0..versions.len() {
        for j in (i + 1)..versions.len() {
            let result = significance_test(
                &per_version(&versions[i]),
                &per_version(&versions[j]),
                settings.resamples as usize,
                settings.seed,
            )
            .map_err(semantic_error)?;
            pairs.push(SignificancePair {
                first: versions[i].clone(),
                second: versions[j].clone(),
                result,
            });
        }
    }
    Ok(SignificanceArtifact {
        corpus: corpus.id.clone(),
        pairs,
    })
}

fn semantic_error(error: SemanticError) -> CliError {
    match error {
        SemanticError::Provider { .. } => CliError::AnalyzeProvider(error.to_string()),
        _ => CliError::Validation(error.to_string()),
    }
}

fn tokenmatch_error(error: TokenMatchError) -> CliError {
    match error {
        TokenMatchError::Provider(_) => CliError::AnalyzeProvider(error.to_string()),
        _ => CliError::Validation(error.to_string()),
    }
}
