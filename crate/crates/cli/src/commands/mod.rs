//! The four pipeline stages behind the subcommands, plus the error type
//! that fixes the process exit codes.

pub mod analyze;
pub mod ingest;
pub mod report;
pub mod translate;

use std::collections::BTreeSet;
use std::path::PathBuf;

use transeval_core::corpus::SegmentOptions;
use transeval_core::report::export::ExportFormat;

/// Failure modes mapped one-to-one onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration. Exit 2.
    Usage(String),
    /// Input data failed validation. Exit 2.
    Validation(String),
    /// A translation provider was entirely unreachable. Exit 3.
    TranslateProvider(String),
    /// An analysis provider failed after retries. Exit 4.
    AnalyzeProvider(String),
    /// The report stage is missing an upstream artifact. Exit 5.
    MissingArtifact(PathBuf),
    /// Unexpected environment failure (I/O, serialization). Exit 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) | CliError::Validation(_) => 2,
            CliError::TranslateProvider(_) => 3,
            CliError::AnalyzeProvider(_) => 4,
            CliError::MissingArtifact(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::TranslateProvider(_) => "translate_provider",
            CliError::AnalyzeProvider(_) => "analyze_provider",
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m)
            | CliError::Validation(m)
            | CliError::TranslateProvider(m)
            | CliError::AnalyzeProvider(m)
            | CliError::Internal(m) => m.clone(),
            CliError::MissingArtifact(path) => {
                format!("missing analyze artifact: {}", path.display())
            }
        }
    }
}

/// Analysis stages that `--skip` can disable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ngrams,
    Sentiment,
    TokenMatch,
    Significance,
}

impl Stage {
    pub fn parse(name: &str) -> Result<Stage, CliError> {
        match name {
            "ngrams" => Ok(Stage::Ngrams),
            "sentiment" => Ok(Stage::Sentiment),
            "tokenmatch" => Ok(Stage::TokenMatch),
            "significance" => Ok(Stage::Significance),
            other => Err(CliError::Usage(format!(
                "unknown stage '{other}' for --skip \
                 (expected ngrams, sentiment, tokenmatch, or significance)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Sentence,
    Paragraph,
    Verse,
}

impl Granularity {
    pub fn parse(name: &str) -> Result<Granularity, CliError> {
        match name {
            "sentence" => Ok(Granularity::Sentence),
            "paragraph" => Ok(Granularity::Paragraph),
            "verse" => Ok(Granularity::Verse),
            other => Err(CliError::Usage(format!(
                "unknown granularity '{other}' (expected sentence, paragraph, or verse)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::Sentence => "sentence",
            Granularity::Paragraph => "paragraph",
            Granularity::Verse => "verse",
        }
    }
}

/// Fully resolved run options: flags first, then profile defaults, then
/// built-ins.
#[derive(Debug, Clone)]
pub struct Settings {
    pub corpora: Vec<PathBuf>,
    pub providers_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub seed: u64,
    pub threshold: f64,
    pub resamples: u32,
    pub skip: BTreeSet<Stage>,
    pub formats: Vec<ExportFormat>,
    pub granularity: Granularity,
    pub comma_splits: bool,
    pub dry_run: bool,
    pub porcelain: bool,
}

impl Settings {
    pub fn segment_options(&self) -> SegmentOptions {
        SegmentOptions {
            comma_splits: self.comma_splits,
        }
    }

    pub fn require_corpora(&self) -> Result<&[PathBuf], CliError> {
        if self.corpora.is_empty() {
            return Err(CliError::Usage(
                "no corpus given; pass --corpus <dir> at least once".to_string(),
            ));
        }
        Ok(&self.corpora)
    }

    pub fn require_out(&self) -> Result<&PathBuf, CliError> {
        self.out.as_ref().ok_or_else(|| {
            CliError::Usage("this command needs --out <run-directory>".to_string())
        })
    }

    pub fn require_providers(&self) -> Result<&PathBuf, CliError> {
        self.providers_path.as_ref().ok_or_else(|| {
            CliError::Usage("this command needs --providers <profile.toml>".to_string())
        })
    }
}
