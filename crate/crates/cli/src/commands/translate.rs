//! Fills candidate versions from the configured translation providers.
//!
//! The corpus needs only its manifest, source, and expert files at this
//! point; candidate files are (re)written here. A refusal becomes the
//! candidate text verbatim plus a warning, so alignment survives and the
//! affected verse stays visible downstream. Per-unit failures leave a gap
//! and a warning; a provider whose every request fails is unreachable and
//! aborts the run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use transeval_core::corpus::{
    read_version_records, CorpusManifest, VersionId, EXPERT_VERSION, SOURCE_FILE_STEM,
};
use transeval_core::corpus::write_version_file;
use transeval_core::providers::ProviderError;

use crate::config::{ProfileFile, Runtime};
use crate::emit::Emitter;

use super::{CliError, Settings};

#[derive(Debug, Clone, Serialize)]
pub struct UnitFlag {
    pub corpus: String,
    pub version: String,
    pub chapter: u32,
    pub verse: u32,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TranslateReport {
    pub refusals: Vec<UnitFlag>,
    pub failures: Vec<UnitFlag>,
    pub warnings: usize,
}

pub fn run(settings: &Settings, emit: &Emitter) -> Result<(), CliError> {
    let corpora = settings.require_corpora()?;
    let profile = ProfileFile::load(settings.require_providers()?)?;
    let runtime = Runtime::from_profile(&profile, settings.cache.as_deref())?;
    if runtime.translators.is_empty() {
        return Err(CliError::Usage(
            "profile defines no translators; set [roles] translators".to_string(),
        ));
    }

    let mut report = TranslateReport::default();
    for dir in corpora {
        translate_corpus(dir, settings, &runtime, emit, &mut report)?;
    }

    report.warnings = report.refusals.len() + report.failures.len();
    if let Some(out) = &settings.out {
        if !settings.dry_run {
            crate::artifacts::write_artifact(out, "translate_report.json", &report)?;
        }
    }
    emit.result(
        &format!("warnings: {}", report.warnings),
        json!({
            "event": "summary",
            "warnings": report.warnings,
            "refusals": report.refusals.len(),
            "failures": report.failures.len(),
        }),
    );
    Ok(())
}

fn translate_corpus(
    dir: &Path,
    settings: &Settings,
    runtime: &Runtime,
    emit: &Emitter,
    report: &mut TranslateReport,
) -> Result<(), CliError> {
    let manifest = CorpusManifest::load(dir).map_err(|e| CliError::Validation(e.to_string()))?;
    let corpus_id = manifest
        .id
        .clone()
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "corpus".to_string());
    let source = read_version_records(dir, SOURCE_FILE_STEM)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if source.is_empty() {
        return Err(CliError::Validation(format!(
            "corpus {corpus_id} has an empty source file"
        )));
    }

    // Candidate versions that have a configured translator of the same name.
    let mut targets: Vec<&str> = Vec::new();
    for version in &manifest.versions {
        if version == EXPERT_VERSION {
            continue;
        }
        VersionId::new(version).map_err(|e| CliError::Validation(e.to_string()))?;
        if runtime.translators.contains_key(version) {
            targets.push(version);
        } else if !dir.join(format!("{version}.txt")).exists() {
            emit.note(&format!(
                "warning: corpus {corpus_id} declares version '{version}' \
                 but no translator of that name is configured and no file exists"
            ));
        }
    }

    let keys: Vec<(u32, u32)> = source.keys().copied().collect();
    let texts: Vec<&str> = keys.iter().map(|k| source[k].as_str()).collect();

    for version in targets {
        if settings.dry_run {
            emit.result(
                &format!(
                    "would translate {} units of {corpus_id} into '{version}'",
                    keys.len()
                ),
                json!({
                    "event": "plan",
                    "action": "translate",
                    "corpus": corpus_id,
                    "version": version,
                    "units": keys.len(),
                }),
            );
            continue;
        }
        let provider = &runtime.translators[version];
        emit.note(&format!(
            "translating {} units of {corpus_id} into '{version}'",
            keys.len()
        ));
        let results = provider.translate_batch(&texts);

        let mut records: BTreeMap<(u32, u32), String> = BTreeMap::new();
        let mut hard_failures = 0usize;
        for (key, result) in keys.iter().zip(results) {
            match result {
                Ok(text) => {
                    records.insert(*key, text);
                }
                Err(ProviderError::Refusal { payload }) => {
                    report.refusals.push(UnitFlag {
                        corpus: corpus_id.clone(),
                        version: version.to_string(),
                        chapter: key.0,
                        verse: key.1,
                        detail: payload.clone(),
                    });
                    emit.note(&format!(
                        "warning: '{version}' refused {corpus_id} {}:{}",
                        key.0, key.1
                    ));
                    // The refusal text stands in as the candidate verse.
                    records.insert(*key, payload);
                }
                Err(other) => {
                    hard_failures += 1;
                    report.failures.push(UnitFlag {
                        corpus: corpus_id.clone(),
                        version: version.to_string(),
                        chapter: key.0,
                        verse: key.1,
                        detail: other.to_string(),
                    });
                    emit.note(&format!(
                        "warning: '{version}' failed on {corpus_id} {}:{}: {other}",
                        key.0, key.1
                    ));
                }
            }
        }

        if records.is_empty() && hard_failures > 0 {
            let first = report
                .failures
                .iter()
                .rev()
                .find(|f| f.version == version)
                .map(|f| f.detail.clone())
                .unwrap_or_default();
            return Err(CliError::TranslateProvider(format!(
                "provider '{version}' is unreachable: every request failed ({first})"
            )));
        }

        write_version_file(
            dir,
            version,
            records.into_iter().map(|((c, v), t)| (c, v, t)),
        )
        .map_err(|e| CliError::Internal(e.to_string()))?;
        emit.result(
            &format!(
                "{version}: {} units written ({} refusals, {} failures)",
                keys.len() - hard_failures,
                report.refusals.iter().filter(|f| f.version == version).count(),
                hard_failures
            ),
            json!({
                "event": "translated",
                "corpus": corpus_id,
                "version": version,
                "units": keys.len() - hard_failures,
                "refusals": report.refusals.iter().filter(|f| f.version == version).count(),
                "failures": hard_failures,
            }),
        );
    }
    Ok(())
}
