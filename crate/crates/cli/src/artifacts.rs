//! JSON artifacts the analyze stage writes into the run directory and the
//! report stage reads back. One subdirectory per corpus id.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use transeval_core::corpus::{TextType, VersionId};
use transeval_core::report::{CorpusStamp, ProviderStamp};
use transeval_core::semantic::{
    ChapterSummary, SignificanceResult, SimilarityRecord, SkippedUnit, VerseExtreme,
};
use transeval_core::sentiment::SentimentDistribution;
use transeval_core::tokenmatch::{MatchStrategy, TokenMatchScore};

use crate::commands::CliError;

pub const SIMILARITY_FILE: &str = "similarity.json";
pub const NGRAMS_FILE: &str = "ngrams.json";
pub const SENTIMENT_FILE: &str = "sentiment.json";
pub const TOKENMATCH_FILE: &str = "tokenmatch.json";
pub const SIGNIFICANCE_FILE: &str = "significance.json";
pub const SENTENCE_COUNTS_FILE: &str = "sentence_counts.json";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityArtifact {
    pub corpus: String,
    pub text_type: TextType,
    pub chapters: usize,
    pub units: usize,
    pub records: Vec<SimilarityRecord>,
    pub skipped: Vec<SkippedUnit>,
    pub chapter_summaries: Vec<ChapterSummary>,
    pub corpus_means: BTreeMap<VersionId, f64>,
    /// Absent for versions that cannot compute one (single-chapter corpus).
    pub variation_pp: BTreeMap<VersionId, f64>,
    pub extremes_lowest: Vec<VerseExtreme>,
    pub extremes_highest: Vec<VerseExtreme>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramEntry {
    pub ngram: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramBlock {
    pub n: usize,
    pub total: u64,
    pub distinct: usize,
    pub top: Vec<NgramEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramArtifact {
    pub corpus: String,
    pub top_k: usize,
    pub tables: BTreeMap<VersionId, Vec<NgramBlock>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentimentArtifact {
    pub corpus: String,
    pub granularity: String,
    pub threshold: f64,
    pub distributions: BTreeMap<VersionId, SentimentDistribution>,
    /// Corpus-level deviation from the expert profile; candidates only.
    pub deviations_pp: BTreeMap<VersionId, f64>,
    /// Chapter-level deviations, for the combined analysis join.
    pub chapter_deviations_pp: BTreeMap<VersionId, BTreeMap<u32, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenMatchArtifact {
    pub corpus: String,
    pub strategy: MatchStrategy,
    pub units: usize,
    /// Mean precision/recall/F1 over all units, per candidate version.
    pub means: BTreeMap<VersionId, TokenMatchScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignificancePair {
    pub first: VersionId,
    pub second: VersionId,
    pub result: SignificanceResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignificanceArtifact {
    pub corpus: String,
    pub pairs: Vec<SignificancePair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceCountsArtifact {
    pub corpus: String,
    pub counts: BTreeMap<VersionId, usize>,
}

/// Everything the report stage needs to reconstruct the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaArtifact {
    pub corpus: CorpusStamp,
    pub providers: Vec<ProviderStamp>,
    pub seed: u64,
    pub resamples: u32,
    pub sentiment_threshold: f64,
    pub granularity: String,
    pub comma_splits: bool,
    pub segmentation_rules: String,
    pub stoplist_sha256: String,
}

/// Serializes `value` to `<dir>/<name>` with a trailing newline.
pub fn write_artifact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("cannot serialize {name}: {e}")))?;
    body.push('\n');
    fs::write(&path, body)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Reads an artifact, mapping a missing file to [`CliError::MissingArtifact`]
/// so the report stage can exit with the dedicated status.
pub fn read_artifact<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, CliError> {
    let path = dir.join(name);
    let raw = match fs::read_to_string(&path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingArtifact(path))
        }
        Err(e) => {
            return Err(CliError::Internal(format!(
                "cannot read {}: {e}",
                path.display()
            )))
        }
    };
    serde_json::from_str(&raw).map_err(|e| {
        CliError::Validation(format!("corrupt artifact {}: {e}", path.display()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = SentenceCountsArtifact {
            corpus: "demo".to_string(),
            counts: BTreeMap::from([(VersionId::expert(), 42)]),
        };
        write_artifact(dir.path(), SENTENCE_COUNTS_FILE, &artifact).unwrap();
        let back: SentenceCountsArtifact =
            read_artifact(dir.path(), SENTENCE_COUNTS_FILE).unwrap();
        assert_eq!(back.corpus, "demo");
        assert_eq!(back.counts[&VersionId::expert()], 42);
    }

    #[test]
    fn missing_artifact_keeps_the_path() {
        let dir = tempfile::tempdir().unwrap();
        match read_artifact::<SentenceCountsArtifact>(dir.path(), SIMILARITY_FILE) {
            Err(CliError::MissingArtifact(path)) => {
                assert!(path.ends_with(SIMILARITY_FILE), "{path:?}")
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn corrupt_artifact_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(META_FILE), b"{not json").unwrap();
        match read_artifact::<MetaArtifact>(dir.path(), META_FILE) {
            Err(CliError::Validation(message)) => assert!(message.contains("meta.json")),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
