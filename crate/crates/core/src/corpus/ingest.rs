//! On-disk corpus layout and ingestion.
//!
//! A corpus directory holds a `manifest` (TOML), a `source.txt` with the
//! Chinese text, and one `<version>.txt` per declared translation. Version
//! files are tab-separated records `chapter<TAB>verse<TAB>text`, one per
//! line. A blank line between two records of the same verse marks a
//! paragraph break inside that verse; in memory the break becomes `\n`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AlignedUnit, Chapter, Corpus, CorpusError, TextType, VersionId, EXPERT_VERSION};

pub const MANIFEST_FILE: &str = "manifest";
/// File stem of the Chinese source text, reserved like `expert`.
pub const SOURCE_FILE_STEM: &str = "source";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// Defaults to the corpus directory name.
    pub id: Option<String>,
    pub text_type: TextType,
    /// All translation versions, `expert` included.
    pub versions: Vec<String>,
}

impl CorpusManifest {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let path = dir.join(MANIFEST_FILE);
        let raw = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let manifest: CorpusManifest =
            toml::from_str(&raw).map_err(|e| CorpusError::Manifest {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if !manifest.versions.iter().any(|v| v == EXPERT_VERSION) {
            return Err(CorpusError::Manifest {
                path: path.display().to_string(),
                message: format!("versions must include '{EXPERT_VERSION}'"),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        let path = dir.join(MANIFEST_FILE);
        let body = toml::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, body).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }
}

type Key = (u32, u32);

/// Loads and fully validates the corpus at `dir`.
///
/// Every declared version (plus the source) must cover exactly the same
/// verse keys; the first divergence is reported as an [`CorpusError::AlignmentGap`].
pub fn ingest_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let manifest = CorpusManifest::load(dir)?;
    let id = manifest
        .id
        .clone()
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "corpus".to_string());

    let mut candidate_versions = Vec::new();
    for v in &manifest.versions {
        let vid = VersionId::new(v)?;
        if vid.as_str() == SOURCE_FILE_STEM {
            return Err(CorpusError::Manifest {
                path: dir.join(MANIFEST_FILE).display().to_string(),
                message: format!("'{SOURCE_FILE_STEM}' is reserved for the source text"),
            });
        }
        if !vid.is_expert() {
            candidate_versions.push(vid);
        }
    }

    let source = read_version_file(dir, SOURCE_FILE_STEM)?;
    let expert = read_version_file(dir, EXPERT_VERSION)?;
    let mut candidates: Vec<(VersionId, BTreeMap<Key, String>)> = Vec::new();
    for vid in &candidate_versions {
        candidates.push((vid.clone(), read_version_file(dir, vid.as_str())?));
    }

    let mut keys: BTreeSet<Key> = BTreeSet::new();
    keys.extend(source.keys());
    keys.extend(expert.keys());
    for (_, records) in &candidates {
        keys.extend(records.keys());
    }

    for &(chapter, verse) in &keys {
        for (name, records) in std::iter::once((SOURCE_FILE_STEM, &source))
            .chain(std::iter::once((EXPERT_VERSION, &expert)))
            .chain(candidates.iter().map(|(v, r)| (v.as_str(), r)))
        {
            if !records.contains_key(&(chapter, verse)) {
                return Err(CorpusError::AlignmentGap {
                    version: VersionId::new(name)?,
                    chapter,
                    verse,
                });
            }
        }
    }

    let mut chapters: Vec<Chapter> = Vec::new();
    for &(chapter, verse) in &keys {
        if chapters.last().map(|c| c.index) != Some(chapter) {
            chapters.push(Chapter {
                index: chapter,
                units: Vec::new(),
            });
        }
        let unit = AlignedUnit {
            chapter,
            verse,
            source_zh: source[&(chapter, verse)].clone(),
            reference_en: expert[&(chapter, verse)].clone(),
            candidates: candidates
                .iter()
                .map(|(v, r)| (v.clone(), r[&(chapter, verse)].clone()))
                .collect(),
        };
        chapters.last_mut().expect("pushed above").units.push(unit);
    }

    let corpus = Corpus {
        id,
        text_type: manifest.text_type,
        candidate_versions,
        chapters,
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Reads one version file without cross-version alignment checks. The
/// translate stage uses this while candidate files are still missing.
pub fn read_version_records(
    dir: &Path,
    stem: &str,
) -> Result<BTreeMap<(u32, u32), String>, CorpusError> {
    read_version_file(dir, stem)
}

fn read_version_file(dir: &Path, stem: &str) -> Result<BTreeMap<Key, String>, CorpusError> {
    let path = dir.join(format!("{stem}.txt"));
    if !path.exists() {
        return Err(CorpusError::MissingVersionFile {
            version: stem.to_string(),
            path: path.display().to_string(),
        });
    }
    let bytes = fs::read(&path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Encoding {
        path: path.display().to_string(),
        byte_offset: e.valid_up_to(),
    })?;
    parse_version_text(text, &path.display().to_string())
}

fn parse_version_text(text: &str, path: &str) -> Result<BTreeMap<Key, String>, CorpusError> {
    let malformed = |line: usize, message: String| CorpusError::Malformed {
        path: path.to_string(),
        line,
        message,
    };
    let mut records: BTreeMap<Key, String> = BTreeMap::new();
    let mut last_key: Option<Key> = None;
    let mut pending_break = false;
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            pending_break = last_key.is_some();
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (chapter, verse, body) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(v), Some(t)) => (c, v, t),
            _ => {
                return Err(malformed(
                    line_no,
                    "expected chapter<TAB>verse<TAB>text".into(),
                ))
            }
        };
        let chapter: u32 = chapter
            .parse()
            .map_err(|_| malformed(line_no, format!("invalid chapter '{chapter}'")))?;
        let verse: u32 = verse
            .parse()
            .map_err(|_| malformed(line_no, format!("invalid verse '{verse}'")))?;
        if body.trim().is_empty() {
            return Err(malformed(line_no, format!("empty text for {chapter}:{verse}")));
        }
        let key = (chapter, verse);
        match last_key {
            Some(prev) if prev == key => {
                if !pending_break {
                    return Err(malformed(
                        line_no,
                        format!("duplicate record for {chapter}:{verse}"),
                    ));
                }
                let entry = records.get_mut(&key).expect("continued verse exists");
                entry.push('\n');
                entry.push_str(body);
            }
            Some(prev) if key <= prev => {
                return Err(malformed(
                    line_no,
                    format!(
                        "records out of order: {}:{} after {}:{}",
                        chapter, verse, prev.0, prev.1
                    ),
                ));
            }
            _ => {
                records.insert(key, body.to_string());
            }
        }
        last_key = Some(key);
        pending_break = false;
    }
    Ok(records)
}

/// Writes one version back to its TSV file, splitting paragraph breaks into
/// the blank-line continuation form. Inverse of the ingest parser.
pub fn write_version_file(
    dir: &Path,
    stem: &str,
    records: impl IntoIterator<Item = (u32, u32, String)>,
) -> Result<PathBuf, CorpusError> {
    let path = dir.join(format!("{stem}.txt"));
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(&path).map_err(io_err)?;
    for (chapter, verse, text) in records {
        for (i, paragraph) in text.split('\n').filter(|p| !p.trim().is_empty()).enumerate() {
            if i > 0 {
                writeln!(file).map_err(io_err)?;
            }
            writeln!(file, "{chapter}\t{verse}\t{paragraph}").map_err(io_err)?;
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SegmentOptions;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn minimal_manifest(dir: &Path, versions: &[&str]) {
        let quoted: Vec<String> = versions.iter().map(|v| format!("\"{v}\"")).collect();
        write(
            dir,
            MANIFEST_FILE,
            &format!("text_type = \"news\"\nversions = [{}]\n", quoted.join(", ")),
        );
    }

    fn fixture(dir: &Path) {
        minimal_manifest(dir, &["expert", "google"]);
        write(dir, "source.txt", "1\t1\t你好。\n1\t2\t再见。\n2\t1\t走。\n");
        write(dir, "expert.txt", "1\t1\tHello.\n1\t2\tGoodbye.\n2\t1\tGo.\n");
        write(dir, "google.txt", "1\t1\tHi.\n1\t2\tBye.\n2\t1\tWalk.\n");
    }

    #[test]
    fn ingests_aligned_corpus() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let corpus = ingest_corpus(dir.path()).unwrap();
        assert_eq!(corpus.text_type, TextType::News);
        assert_eq!(corpus.chapters.len(), 2);
        assert_eq!(corpus.unit_count(), 3);
        let unit = &corpus.chapters[0].units[1];
        assert_eq!(unit.verse, 2);
        assert_eq!(unit.reference_en, "Goodbye.");
        assert_eq!(unit.text_of(&VersionId::new("google").unwrap()), Some("Bye."));
    }

    #[test]
    fn corpus_id_defaults_to_directory_name() {
        let dir = tempfile::tempdir().unwrap();
        let inner = dir.path().join("news-2024");
        fs::create_dir(&inner).unwrap();
        fixture(&inner);
        assert_eq!(ingest_corpus(&inner).unwrap().id, "news-2024");
    }

    #[test]
    fn blank_line_joins_paragraphs_of_one_verse() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["expert"]);
        write(dir.path(), "source.txt", "1\t1\t上。\n\n1\t1\t下。\n");
        write(dir.path(), "expert.txt", "1\t1\tUp.\n\n1\t1\tDown.\n");
        let corpus = ingest_corpus(dir.path()).unwrap();
        assert_eq!(corpus.chapters[0].units[0].reference_en, "Up.\nDown.");
    }

    #[test]
    fn duplicate_verse_without_blank_line_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["expert"]);
        write(dir.path(), "source.txt", "1\t1\t你好。\n");
        write(dir.path(), "expert.txt", "1\t1\tHello.\n1\t1\tAgain.\n");
        match ingest_corpus(dir.path()) {
            Err(CorpusError::Malformed { line: 2, message, .. }) => {
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn missing_version_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::remove_file(dir.path().join("google.txt")).unwrap();
        match ingest_corpus(dir.path()) {
            Err(CorpusError::MissingVersionFile { version, .. }) => assert_eq!(version, "google"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_reports_byte_offset() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::write(dir.path().join("google.txt"), b"1\t1\tok\n1\t2\tA\xFFB\n2\t1\tW.\n").unwrap();
        match ingest_corpus(dir.path()) {
            Err(CorpusError::Encoding { byte_offset, .. }) => assert_eq!(byte_offset, 12),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn alignment_gap_names_version_and_verse() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(dir.path(), "google.txt", "1\t1\tHi.\n2\t1\tWalk.\n");
        match ingest_corpus(dir.path()) {
            Err(CorpusError::AlignmentGap { version, chapter: 1, verse: 2 }) => {
                assert_eq!(version.as_str(), "google");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn out_of_order_records_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["expert"]);
        write(dir.path(), "source.txt", "1\t2\t你好。\n1\t1\t再见。\n");
        write(dir.path(), "expert.txt", "1\t1\tHello.\n1\t2\tBye.\n");
        assert!(matches!(
            ingest_corpus(dir.path()),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn chapters_must_start_at_one() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["expert"]);
        write(dir.path(), "source.txt", "2\t1\t你好。\n");
        write(dir.path(), "expert.txt", "2\t1\tHello.\n");
        assert!(matches!(
            ingest_corpus(dir.path()),
            Err(CorpusError::NonContiguousChapters { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn manifest_requires_expert() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["google"]);
        assert!(matches!(
            CorpusManifest::load(dir.path()),
            Err(CorpusError::Manifest { .. })
        ));
    }

    #[test]
    fn manifest_rejects_reserved_source_id() {
        let dir = tempfile::tempdir().unwrap();
        minimal_manifest(dir.path(), &["expert", "source"]);
        write(dir.path(), "source.txt", "1\t1\t你好。\n");
        write(dir.path(), "expert.txt", "1\t1\tHello.\n");
        assert!(matches!(ingest_corpus(dir.path()), Err(CorpusError::Manifest { .. })));
    }

    #[test]
    fn write_version_file_round_trips_paragraphs() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![(1, 1, "Up.\nDown.".to_string()), (1, 2, "Flat.".to_string())];
        write_version_file(dir.path(), "expert", records.clone()).unwrap();
        let parsed = read_version_file(dir.path(), "expert").unwrap();
        assert_eq!(parsed[&(1, 1)], "Up.\nDown.");
        assert_eq!(parsed[&(1, 2)], "Flat.");
    }

    #[test]
    fn sentence_counts_match_fixture() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let corpus = ingest_corpus(dir.path()).unwrap();
        let counts = crate::corpus::sentence_counts(&corpus, &SegmentOptions::default()).unwrap();
        assert_eq!(counts[&VersionId::expert()], 3);
    }

    proptest::proptest! {
        // Write-then-ingest is lossless, and deleting any single record
        // surfaces as an alignment gap at exactly that verse.
        #[test]
        fn write_ingest_round_trip(
            verses in proptest::collection::vec(1u32..40, 1..8),
            drop_index in proptest::option::of(0usize..8),
        ) {
            let mut verses: Vec<u32> = verses;
            verses.sort_unstable();
            verses.dedup();
            let dir = tempfile::tempdir().unwrap();
            minimal_manifest(dir.path(), &["expert", "google"]);
            let mk = |tag: &str| -> Vec<(u32, u32, String)> {
                verses.iter().map(|&v| (1, v, format!("{tag} {v}."))).collect()
            };
            write_version_file(dir.path(), "source", mk("源")).unwrap();
            write_version_file(dir.path(), "expert", mk("Ref")).unwrap();
            let mut google = mk("Cand");
            let dropped = drop_index.filter(|&i| i < google.len()).map(|i| google.remove(i));
            write_version_file(dir.path(), "google", google).unwrap();

            match (ingest_corpus(dir.path()), dropped) {
                (Ok(corpus), None) => {
                    proptest::prop_assert_eq!(corpus.unit_count(), verses.len());
                    let got: Vec<u32> =
                        corpus.units().map(|u| u.verse).collect();
                    proptest::prop_assert_eq!(got, verses);
                }
                (Err(CorpusError::AlignmentGap { version, chapter, verse }), Some((c, v, _))) => {
                    proptest::prop_assert_eq!(version.as_str(), "google");
                    proptest::prop_assert_eq!((chapter, verse), (c, v));
                }
                (outcome, dropped) => {
                    return Err(proptest::test_runner::TestCaseError::fail(
                        format!("mismatch: {outcome:?} dropped={dropped:?}")));
                }
            }
        }
    }
}
