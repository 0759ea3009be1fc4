//! Corpus validation and the sentence-count summary.

use serde_json::json;

use transeval_core::corpus::{
    ingest_corpus, script_mix_warnings, sentence_counts, CorpusError, MANIFEST_FILE,
};

use super::{CliError, Settings};
use crate::emit::Emitter;

pub fn run(settings: &Settings, emit: &Emitter) -> Result<(), CliError> {
    let corpora = settings.require_corpora()?;
    for dir in corpora {
        if settings.dry_run {
            emit.result(
                &format!("would validate corpus {}", dir.display()),
                json!({"event": "plan", "action": "ingest", "corpus": dir.display().to_string()}),
            );
            continue;
        }
        let corpus = ingest_corpus(dir).map_err(|e| classify(e, &dir.display().to_string()))?;
        if corpus.unit_count() == 0 {
            return Err(CliError::Validation(format!(
                "corpus {} has no aligned units",
                dir.display()
            )));
        }
        for warning in script_mix_warnings(&corpus) {
            emit.note(&format!("warning: {warning}"));
        }
        let counts = sentence_counts(&corpus, &settings.segment_options())
            .map_err(|e| CliError::Validation(e.to_string()))?;
        emit.note(&format!(
            "corpus {} ({}): {} chapters, {} units",
            corpus.id,
            corpus.text_type.as_str(),
            corpus.chapters.len(),
            corpus.unit_count()
        ));
        if !settings.porcelain {
            println!("corpus {} sentence counts", corpus.id);
            println!("{:<12} {:>9}", "version", "sentences");
        }
        for (version, count) in &counts {
            emit.result(
                &format!("{:<12} {count:>9}", version.as_str()),
                json!({
                    "event": "sentence_counts",
                    "corpus": corpus.id,
                    "version": version.as_str(),
                    "sentences": count,
                }),
            );
        }
    }
    Ok(())
}

/// Maps corpus errors to exit semantics: a missing manifest is a usage
/// problem (with a hint), everything else is a validation failure.
fn classify(error: CorpusError, dir: &str) -> CliError {
    match &error {
        CorpusError::Io { path, .. } if path.ends_with(MANIFEST_FILE) => CliError::Usage(format!(
            "{error}; expected a corpus directory containing '{MANIFEST_FILE}' \
             (TOML with text_type and versions), got {dir}"
        )),
        _ => CliError::Validation(error.to_string()),
    }
}
