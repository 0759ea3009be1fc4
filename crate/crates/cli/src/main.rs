//! Command-line front end for the translation evaluation pipeline.
//!
//! Four subcommands mirror the pipeline stages: `ingest` validates corpora,
//! `translate` fills candidate versions, `analyze` computes metric artifacts,
//! and `report` folds them into the export set. Options resolve in a fixed
//! order: command-line flag, then the `[defaults]` table of the provider
//! profile, then the built-in value.

mod artifacts;
mod commands;
mod config;
mod emit;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use transeval_core::report::export::ExportFormat;

use commands::{CliError, Granularity, Settings, Stage};
use config::{Defaults, ProfileFile};
use emit::Emitter;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_THRESHOLD: f64 = 0.5;
const DEFAULT_RESAMPLES: u32 = 1000;

#[derive(Parser)]
#[command(
    name = "transeval",
    version,
    about = "Evaluates machine translations of aligned Chinese-English corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpora and print per-version sentence counts
    Ingest,
    /// Fill candidate translations through the configured providers
    Translate,
    /// Compute all metric artifacts into the run directory
    Analyze,
    /// Fold analyze artifacts into the final export set
    Report,
}

#[derive(Args)]
struct GlobalOpts {
    /// Corpus directory; repeat the flag for several corpora
    #[arg(long = "corpus", global = true, value_name = "DIR")]
    corpus: Vec<PathBuf>,

    /// Provider profile (TOML)
    #[arg(long, global = true, value_name = "FILE")]
    providers: Option<PathBuf>,

    /// Run directory for artifacts and exports
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Response cache directory shared across runs
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,

    /// Seed for the significance resampler
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Sentiment activation threshold, exclusive between 0 and 1
    #[arg(long, global = true, value_name = "X")]
    threshold: Option<f64>,

    /// Bootstrap resample count
    #[arg(long, global = true, value_name = "N")]
    resamples: Option<u32>,

    /// Analysis stage to skip (ngrams, sentiment, tokenmatch, significance);
    /// repeat or comma-separate
    #[arg(long = "skip", global = true, value_name = "STAGE", value_delimiter = ',')]
    skip: Vec<String>,

    /// Export formats, comma-separated (csv, json)
    #[arg(long, global = true, value_name = "LIST")]
    formats: Option<String>,

    /// Sentiment unit: sentence, paragraph, or verse
    #[arg(long, global = true, value_name = "UNIT")]
    granularity: Option<String>,

    /// Treat commas as sentence boundaries during segmentation
    #[arg(long = "comma-splits", global = true)]
    comma_splits: bool,

    /// Print planned actions without writing anything
    #[arg(long = "dry-run", global = true)]
    dry_run: bool,

    /// Machine-readable JSON lines on standard out
    #[arg(long, global = true)]
    porcelain: bool,
}

fn resolve_settings(opts: &GlobalOpts) -> Result<Settings, CliError> {
    let defaults = match &opts.providers {
        Some(path) => ProfileFile::load(path)?.defaults,
        None => Defaults::default(),
    };
    let threshold = opts
        .threshold
        .or(defaults.threshold)
        .unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Usage(format!(
            "--threshold must sit strictly between 0 and 1, got {threshold}"
        )));
    }
    let resamples = opts
        .resamples
        .or(defaults.resamples)
        .unwrap_or(DEFAULT_RESAMPLES);
    if resamples == 0 {
        return Err(CliError::Usage(
            "--resamples must be at least 1".to_string(),
        ));
    }
    let mut skip = BTreeSet::new();
    for name in &opts.skip {
        skip.insert(Stage::parse(name)?);
    }
    let formats = match &opts.formats {
        Some(list) => {
            ExportFormat::parse_list(list).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => vec![ExportFormat::Csv],
    };
    let granularity = match &opts.granularity {
        Some(name) => Granularity::parse(name)?,
        None => Granularity::Sentence,
    };
    Ok(Settings {
        corpora: opts.corpus.clone(),
        providers_path: opts.providers.clone(),
        out: opts.out.clone(),
        cache: opts.cache.clone(),
        seed: opts.seed.or(defaults.seed).unwrap_or(DEFAULT_SEED),
        threshold,
        resamples,
        skip,
        formats,
        granularity,
        comma_splits: opts.comma_splits,
        dry_run: opts.dry_run,
        porcelain: opts.porcelain,
    })
}

fn main() {
    let cli = Cli::parse();
    let emit = Emitter::new(cli.opts.porcelain);
    let outcome = resolve_settings(&cli.opts).and_then(|settings| match cli.command {
        Command::Ingest => commands::ingest::run(&settings, &emit),
        Command::Translate => commands::translate::run(&settings, &emit),
        Command::Analyze => commands::analyze::run(&settings, &emit),
        Command::Report => commands::report::run(&settings, &emit),
    });
    if let Err(error) = outcome {
        emit.error(
            &format!("error: {}", error.message()),
            json!({
                "event": "error",
                "kind": error.kind(),
                "message": error.message(),
            }),
        );
        process::exit(error.exit_code());
    }
}
