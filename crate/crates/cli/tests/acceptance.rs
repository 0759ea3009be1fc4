//! Acceptance checklist for the whole pipeline. Every test prints one
//! `[PASS]`/`[FAIL]` line (run with `--nocapture` to see the full list) and
//! asserts the same condition, so a failing criterion is visible both ways.
//!
//! The numeric fixtures are chapter-level similarity means and corpus-level
//! sentiment deviations for four translation systems over three evaluation
//! corpora; every expected value below is frozen and hand-checked.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::Value;

use transeval_core::corpus::{TextType, VersionId};
use transeval_core::lexical::{remove_stopwords, tokenize, NgramTable, Stoplist};
use transeval_core::providers::mock::HashEmbedder;
use transeval_core::report::{build_performance_table, Metric, PerformanceInputs};
use transeval_core::semantic::{
    corpus_means, cosine_similarity, inter_chapter_variation, ChapterSummary, EmbeddingVector,
};
use transeval_core::sentiment::{
    sentiment_deviation, EmotionCategory, Polarity, SentimentDistribution,
};
use transeval_core::tokenmatch::{greedy_match_score, score_pair, MatchStrategy};

fn criterion(name: &str, pass: bool, detail: String) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    println!("{tag} {name}");
    assert!(pass, "{name}: {detail}");
}

// Chapter-level similarity means per system: six news chapters, three
// classical chapters, four modern-fiction chapters.
const NEWS: [(&str, [f64; 6]); 4] = [
    ("google", [0.9641, 0.9407, 0.9525, 0.9643, 0.9336, 0.9295]),
    ("deepseek", [0.9644, 0.9496, 0.9496, 0.9573, 0.9422, 0.9571]),
    ("gpt4", [0.9540, 0.9560, 0.9500, 0.9657, 0.9380, 0.9214]),
    ("gpt4o", [0.9659, 0.9572, 0.9544, 0.9667, 0.9238, 0.9200]),
];
const CLASSICAL: [(&str, [f64; 3]); 4] = [
    ("google", [0.6967, 0.6592, 0.7403]),
    ("deepseek", [0.7594, 0.7485, 0.7988]),
    ("gpt4", [0.7355, 0.7036, 0.7640]),
    ("gpt4o", [0.7582, 0.7271, 0.7726]),
];
const MODERN: [(&str, [f64; 4]); 4] = [
    ("google", [0.7825, 0.7507, 0.6824, 0.7240]),
    ("deepseek", [0.8362, 0.8127, 0.7695, 0.7729]),
    ("gpt4", [0.7958, 0.7795, 0.6918, 0.7362]),
    ("gpt4o", [0.8242, 0.7945, 0.7042, 0.7400]),
];

// Corpus-level sentiment deviation from the expert translation, in
// percentage points. Inputs to the combined table, not derived here.
const DEVIATIONS: [(&str, [(&str, f64); 4]); 3] = [
    ("news", [("google", 3.5), ("deepseek", 5.9), ("gpt4", 5.6), ("gpt4o", 5.2)]),
    ("classical", [("google", 17.4), ("deepseek", 7.3), ("gpt4", 17.4), ("gpt4o", 16.0)]),
    ("modern", [("google", 10.0), ("deepseek", 8.4), ("gpt4", 13.8), ("gpt4o", 12.0)]),
];

fn version(name: &str) -> VersionId {
    VersionId::new(name).expect("fixture version id")
}

fn summaries<const N: usize>(table: &[(&str, [f64; N]); 4]) -> Vec<ChapterSummary> {
    (0..N)
        .map(|chapter| {
            let version_means: BTreeMap<VersionId, f64> = table
                .iter()
                .map(|(name, values)| (version(name), values[chapter]))
                .collect();
            let overall_mean =
                version_means.values().sum::<f64>() / version_means.len() as f64;
            ChapterSummary {
                chapter: chapter as u32 + 1,
                version_means,
                overall_mean,
            }
        })
        .collect()
}

fn corpus_fixtures() -> Vec<(&'static str, Vec<ChapterSummary>)> {
    vec![
        ("news", summaries(&NEWS)),
        ("classical", summaries(&CLASSICAL)),
        ("modern", summaries(&MODERN)),
    ]
}

#[test]
fn aggregation_reproduces_the_corpus_means() {
    let started = Instant::now();
    let expected: [(&str, [(&str, f64); 4]); 3] = [
        ("news", [("google", 0.9474), ("deepseek", 0.9534), ("gpt4", 0.9475), ("gpt4o", 0.9480)]),
        ("classical", [("google", 0.6987), ("deepseek", 0.7689), ("gpt4", 0.7343), ("gpt4o", 0.7526)]),
        ("modern", [("google", 0.7349), ("deepseek", 0.7978), ("gpt4", 0.7508), ("gpt4o", 0.7657)]),
    ];
    let mut worst: f64 = 0.0;
    for ((corpus, summaries), (_, cells)) in corpus_fixtures().iter().zip(expected.iter()) {
        let means = corpus_means(summaries);
        for (name, want) in cells {
            let got = means[&version(name)];
            worst = worst.max((got - want).abs());
            assert!(
                (got - want).abs() <= 1e-4,
                "{corpus}/{name}: got {got}, want {want}"
            );
        }
    }
    let fast = started.elapsed().as_secs_f64() < 1.0;
    criterion(
        "corpus means match the frozen averages within 1e-4",
        worst <= 1e-4 && fast,
        format!("largest deviation {worst:.6}, elapsed {:?}", started.elapsed()),
    );
}

#[test]
fn variation_reproduces_the_frozen_spreads() {
    // The news/google cell is 3.48 from the chapter values themselves; the
    // published table prints 3.46 for it, which its own inputs contradict.
    let expected: [(&str, [(&str, f64); 4]); 3] = [
        ("news", [("google", 3.48), ("deepseek", 2.22), ("gpt4", 4.43), ("gpt4o", 4.67)]),
        ("classical", [("google", 8.11), ("deepseek", 5.03), ("gpt4", 6.04), ("gpt4o", 4.55)]),
        ("modern", [("google", 10.01), ("deepseek", 6.67), ("gpt4", 10.40), ("gpt4o", 12.00)]),
    ];
    let mut worst: f64 = 0.0;
    for ((corpus, summaries), (_, cells)) in corpus_fixtures().iter().zip(expected.iter()) {
        for (name, want) in cells {
            let got = inter_chapter_variation(summaries, &version(name))
                .expect("fixture has enough chapters");
            worst = worst.max((got - want).abs());
            assert!(
                (got - want).abs() <= 0.01,
                "{corpus}/{name}: got {got}, want {want}"
            );
        }
    }
    criterion(
        "inter-chapter variation matches the frozen spreads within 0.01 pp",
        worst <= 0.01,
        format!("largest deviation {worst:.4} pp"),
    );
}

#[test]
fn performance_table_matches_the_combined_grid() {
    let text_types = [
        ("news", TextType::News),
        ("classical", TextType::ClassicalLiterature),
        ("modern", TextType::ModernFiction),
    ];
    let inputs: Vec<PerformanceInputs> = corpus_fixtures()
        .into_iter()
        .zip(text_types.iter())
        .map(|((corpus, summaries), (_, text_type))| {
            let deviations = DEVIATIONS
                .iter()
                .find(|(name, _)| *name == corpus)
                .expect("deviation fixture")
                .1
                .iter()
                .map(|(name, pp)| (version(name), *pp))
                .collect();
            PerformanceInputs {
                text_type: *text_type,
                summaries,
                deviations,
            }
        })
        .collect();
    let table = build_performance_table(&inputs).expect("fixture table");

    let similarity_3dp: [(&str, [(&str, &str); 4]); 3] = [
        ("news", [("deepseek", "0.953"), ("gpt4o", "0.948"), ("gpt4", "0.948"), ("google", "0.947")]),
        ("classical", [("deepseek", "0.769"), ("gpt4o", "0.753"), ("gpt4", "0.734"), ("google", "0.699")]),
        ("modern", [("deepseek", "0.798"), ("gpt4o", "0.766"), ("gpt4", "0.751"), ("google", "0.735")]),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for ((name, cells), (_, text_type)) in similarity_3dp.iter().zip(text_types.iter()) {
        for (system, want) in cells {
            let got = format!(
                "{:.3}",
                table.cell(*text_type, &version(system)).expect("cell").similarity
            );
            if got != *want {
                ok = false;
                detail.push_str(&format!("{name}/{system}: got {got}, want {want}; "));
            }
        }
    }

    // Best-per-column markers: the strongest system per text type and metric.
    let best: [(&str, Metric, [(&str, &str); 3]); 3] = [
        ("similarity", Metric::Similarity, [("news", "deepseek"), ("classical", "deepseek"), ("modern", "deepseek")]),
        ("deviation", Metric::SentimentDeviation, [("news", "google"), ("classical", "deepseek"), ("modern", "deepseek")]),
        ("variation", Metric::Variation, [("news", "deepseek"), ("classical", "gpt4o"), ("modern", "deepseek")]),
    ];
    for (metric_name, metric, winners) in best {
        for (corpus, winner) in winners {
            let text_type = text_types
                .iter()
                .find(|(name, _)| *name == corpus)
                .expect("text type")
                .1;
            for (system, _) in &NEWS {
                let is_best = table.is_best(text_type, &version(system), metric);
                if is_best != (*system == winner) {
                    ok = false;
                    detail.push_str(&format!(
                        "{metric_name}/{corpus}: {system} best={is_best}; "
                    ));
                }
            }
        }
    }
    criterion(
        "performance table reproduces the 3-decimal grid and best markers",
        ok,
        detail,
    );
}

#[test]
fn cosine_similarity_property_suite() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_c05e);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..10_000 {
        let dimension = rng.gen_range(1..=8);
        let make = |rng: &mut ChaCha12Rng| -> EmbeddingVector {
            let mut values: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-10.0..10.0)).collect();
            if values.iter().all(|v| *v == 0.0) {
                values[0] = 1.0;
            }
            EmbeddingVector::new(values)
        };
        let a = make(&mut rng);
        let b = make(&mut rng);
        let ab = cosine_similarity(&a, &b).expect("nonzero vectors");
        let ba = cosine_similarity(&b, &a).expect("nonzero vectors");
        if ab != ba {
            ok = false;
            detail = format!("case {case}: symmetry broke ({ab} vs {ba})");
            break;
        }
        if ab.abs() > 1.0 + 1e-9 {
            ok = false;
            detail = format!("case {case}: |{ab}| above bound");
            break;
        }
        let k = 10f64.powf(rng.gen_range(-3.0..3.0));
        let scaled = EmbeddingVector::new(a.values().iter().map(|v| v * k).collect());
        let scaled_ab = cosine_similarity(&scaled, &b).expect("scaled stays nonzero");
        if (scaled_ab - ab).abs() > 1e-9 {
            ok = false;
            detail = format!("case {case}: scale dependence {}", (scaled_ab - ab).abs());
            break;
        }
        let identity = cosine_similarity(&a, &a).expect("nonzero vector");
        if (identity - 1.0).abs() > 1e-9 {
            ok = false;
            detail = format!("case {case}: identity {identity}");
            break;
        }
    }
    let oracle = cosine_similarity(
        &EmbeddingVector::new(vec![1.0, 2.0, 2.0]),
        &EmbeddingVector::new(vec![2.0, 1.0, 2.0]),
    )
    .expect("oracle vectors");
    if (oracle - 8.0 / 9.0).abs() > 1e-4 {
        ok = false;
        detail = format!("hand oracle: got {oracle}, want {}", 8.0 / 9.0);
    }
    criterion(
        "cosine similarity holds symmetry, bound, scale invariance, identity, and the hand oracle",
        ok,
        detail,
    );
}

#[test]
fn token_match_agrees_with_brute_force() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x70ce_317a);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..1_000 {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=6);
        let matrix: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let got = greedy_match_score(&matrix).expect("non-empty matrix");
        let mut recall_sum = 0.0;
        for row in &matrix {
            recall_sum += row.iter().cloned().fold(f64::MIN, f64::max);
        }
        let mut precision_sum = 0.0;
        for j in 0..cols {
            precision_sum += matrix.iter().map(|row| row[j]).fold(f64::MIN, f64::max);
        }
        let recall = recall_sum / rows as f64;
        let precision = precision_sum / cols as f64;
        if got.recall != recall || got.precision != precision {
            ok = false;
            detail = format!(
                "case {case}: got ({}, {}), brute force ({precision}, {recall})",
                got.precision, got.recall
            );
            break;
        }
    }

    let oracle = greedy_match_score(&[vec![1.0, 0.0]]).expect("oracle matrix");
    if oracle.precision != 0.5 || oracle.recall != 1.0 || (oracle.f1 - 2.0 / 3.0).abs() > 1e-4 {
        ok = false;
        detail = format!(
            "[[1,0]] oracle: ({}, {}, {})",
            oracle.precision, oracle.recall, oracle.f1
        );
    }

    let embedder = HashEmbedder::new(7, 24);
    let text = "the delegation toured the irrigation project";
    let identical = score_pair(text, text, &embedder, MatchStrategy::PerToken)
        .expect("identical sequences score");
    if (identical.f1 - 1.0).abs() > 1e-9 {
        ok = false;
        detail = format!("identical sequences f1 {}", identical.f1);
    }
    criterion(
        "token match equals brute-force row/column maxima and the hand oracles",
        ok,
        detail,
    );
}

#[test]
fn ngram_counts_agree_with_window_enumeration() {
    let vocabulary = [
        "the", "and", "of", "a", "harvest", "festival", "river", "delegation", "canal",
        "village", "market", "spring",
    ];
    let stoplist = Stoplist::english();
    let mut rng = ChaCha12Rng::seed_from_u64(0x9647_0000);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..500 {
        let length = rng.gen_range(0..=50);
        let words: Vec<&str> = (0..length)
            .map(|_| vocabulary[rng.gen_range(0..vocabulary.len())])
            .collect();
        let stream = tokenize(&words.join(" "));
        for n in 1..=3usize {
            let mut table = NgramTable::new(n).expect("n is positive");
            table.add_stream(&stream);
            let mut brute: BTreeMap<Vec<String>, u64> = BTreeMap::new();
            if stream.tokens.len() >= n {
                for start in 0..=(stream.tokens.len() - n) {
                    *brute.entry(stream.tokens[start..start + n].to_vec()).or_insert(0) += 1;
                }
            }
            if table.counts() != &brute {
                ok = false;
                detail = format!("case {case}, n={n}: counts diverged");
            }
        }
        let once = remove_stopwords(&stream, stoplist);
        let twice = remove_stopwords(&once, stoplist);
        if once.tokens != twice.tokens {
            ok = false;
            detail = format!("case {case}: stopword removal not idempotent");
        }
    }
    criterion(
        "n-gram counts match brute-force windows and stopword removal is idempotent",
        ok,
        detail,
    );
}

#[test]
fn sentiment_deviation_is_an_l1_metric() {
    let positive = EmotionCategory::ALL
        .iter()
        .filter(|c| c.polarity() == Polarity::Positive)
        .count();
    let neutral = EmotionCategory::ALL
        .iter()
        .filter(|c| c.polarity() == Polarity::Neutral)
        .count();
    let negative = EmotionCategory::ALL
        .iter()
        .filter(|c| c.polarity() == Polarity::Negative)
        .count();
    let mut ok = (positive, neutral, negative) == (3, 1, 5)
        && EmotionCategory::ALL.len() == 9;
    let mut detail = format!("partition ({positive}, {neutral}, {negative})");

    let mut rng = ChaCha12Rng::seed_from_u64(0x5e47_1e47);
    let random_distribution = |rng: &mut ChaCha12Rng| -> SentimentDistribution {
        loop {
            let counts: BTreeMap<Polarity, u64> = Polarity::ALL
                .iter()
                .map(|&p| (p, rng.gen_range(0..=100)))
                .collect();
            if counts.values().sum::<u64>() > 0 {
                return SentimentDistribution::from_polarity_counts(
                    VersionId::expert(),
                    100,
                    counts,
                )
                .expect("nonzero counts");
            }
        }
    };
    for case in 0..1_000 {
        let x = random_distribution(&mut rng);
        let y = random_distribution(&mut rng);
        let z = random_distribution(&mut rng);
        let xy = sentiment_deviation(&x, &y);
        let yx = sentiment_deviation(&y, &x);
        let xz = sentiment_deviation(&x, &z);
        let yz = sentiment_deviation(&y, &z);
        let same_pct = Polarity::ALL.iter().all(|p| x.pct(*p) == y.pct(*p));
        if xy != yx
            || sentiment_deviation(&x, &x) != 0.0
            || (xy == 0.0) != same_pct
            || xz > xy + yz + 1e-9
            || !(0.0..=200.0).contains(&xy)
        {
            ok = false;
            detail = format!("case {case}: metric law broke (d={xy})");
            break;
        }
        for d in [&x, &y, &z] {
            let sum: f64 = Polarity::ALL.iter().map(|p| d.pct(*p)).sum();
            if (sum - 100.0).abs() > 0.05 {
                ok = false;
                detail = format!("case {case}: percentages sum to {sum}");
            }
        }
    }

    let hand = |p: u64, n: u64, g: u64| -> SentimentDistribution {
        let counts: BTreeMap<Polarity, u64> = [
            (Polarity::Positive, p),
            (Polarity::Neutral, n),
            (Polarity::Negative, g),
        ]
        .into_iter()
        .collect();
        SentimentDistribution::from_polarity_counts(VersionId::expert(), 100, counts)
            .expect("hand counts")
    };
    let case = sentiment_deviation(&hand(50, 30, 20), &hand(55, 25, 20));
    if case != 10.0 {
        ok = false;
        detail = format!("hand case: got {case}, want 10.0");
    }
    criterion(
        "sentiment deviation is an L1 metric with the 3/1/5 polarity partition",
        ok,
        detail,
    );
}

// Process-spawning criteria below share these helpers.

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_transeval"));
    cmd.env_remove("TRANSEVAL_FORBID_NETWORK");
    cmd.env("SOURCE_DATE_EPOCH", "1700000000");
    cmd
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn seed_corpus(dst: &Path) {
    fs::create_dir_all(dst).expect("corpus dir");
    for name in ["manifest", "source.txt", "expert.txt"] {
        fs::copy(fixtures().join("mock_corpus").join(name), dst.join(name)).expect("fixture");
    }
}

fn succeed(cmd: &mut Command) -> String {
    let output = cmd.output().expect("binary must spawn");
    assert!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Every file under `dir`, keyed by relative path, with full contents.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(root, &path, into);
            } else {
                let key = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                into.insert(key, fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut map = BTreeMap::new();
    walk(dir, dir, &mut map);
    map
}

#[test]
fn end_to_end_runs_are_byte_identical_without_network() {
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus");
    seed_corpus(&corpus);
    let cache = dir.path().join("cache");
    let providers = fixtures().join("providers_mock.toml");

    succeed(
        binary()
            .arg("translate")
            .arg("--corpus")
            .arg(&corpus)
            .arg("--providers")
            .arg(&providers)
            .arg("--cache")
            .arg(&cache),
    );

    let pipeline = |out: &Path, forbid_network: bool| {
        for subcommand in ["ingest", "analyze", "report"] {
            let mut cmd = binary();
            cmd.arg(subcommand)
                .arg("--corpus")
                .arg(&corpus)
                .arg("--providers")
                .arg(&providers)
                .arg("--out")
                .arg(out)
                .arg("--cache")
                .arg(&cache);
            if forbid_network {
                cmd.env("TRANSEVAL_FORBID_NETWORK", "1");
            }
            succeed(&mut cmd);
        }
    };
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    pipeline(&run1, false);
    // Second pass: the cache is warm, so forbidding the transport proves
    // zero network calls.
    pipeline(&run2, true);

    let first = snapshot(&run1);
    let second = snapshot(&run2);
    let identical = first == second;
    let fast = started.elapsed().as_secs_f64() < 10.0;
    criterion(
        "two pipeline runs are byte-identical and the warm run needs no network",
        identical && fast,
        format!(
            "identical={identical}, files={}, elapsed {:?}",
            first.len(),
            started.elapsed()
        ),
    );
}

#[test]
fn refused_translation_is_flagged_once_and_exits_zero() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus");
    seed_corpus(&corpus);
    let base = fs::read_to_string(fixtures().join("providers_mock.toml")).expect("profile");
    let profile = dir.path().join("providers.toml");
    // One source verse mentions sorghum liquor; the mock refuses it.
    fs::write(
        &profile,
        base.replace(
            "mock = { seed = 11 }",
            "mock = { seed = 11, refuse_containing = \"高粱\" }",
        ),
    )
    .expect("write profile");

    let out_dir = dir.path().join("run");
    let stdout = succeed(
        binary()
            .arg("translate")
            .arg("--corpus")
            .arg(&corpus)
            .arg("--providers")
            .arg(&profile)
            .arg("--out")
            .arg(&out_dir)
            .arg("--porcelain"),
    );

    let summary: Value = stdout
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .find(|v| v["event"] == "summary")
        .expect("summary event");
    let candidate = fs::read_to_string(corpus.join("mta.txt")).expect("candidate file");
    let report: Value = serde_json::from_str(
        &fs::read_to_string(out_dir.join("translate_report.json")).expect("report file"),
    )
    .expect("report JSON");

    let warnings_one = summary["warnings"] == 1 && summary["refusals"] == 1;
    let flagged = report["refusals"][0]["version"] == "mta"
        && report["refusals"][0]["chapter"] == 3
        && report["refusals"][0]["verse"] == 2;
    let payload_kept = candidate.contains("Sorry, but I can't assist with that");
    criterion(
        "a refused unit is flagged, counted as one warning, and the run exits zero",
        warnings_one && flagged && payload_kept,
        format!("summary={summary}, flagged={flagged}, payload_kept={payload_kept}"),
    );
}
