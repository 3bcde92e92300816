//! Command-line front end.
//!
//! Configuration layers, lowest first: the `--preset` (default `cifar`),
//! the JSON file given with `--config` (fields it sets replace the preset's),
//! then `--alpha`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 validation or verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prime::analysis::{EmbeddingSet, FitnessReport};
use prime::bench::bench_throughput;
use prime::pipeline::{
    augment_dataset_with, compose_preview, verify_manifest, AugmentOptions, DEFAULT_SEPARATOR,
};
use prime::validate::{validate_statistics_with, ValidationHooks, DEFAULT_VALIDATION_SEED};
use prime::{Error, Image, PrimeConfig};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "prime", version, about = "Max-entropy image augmentation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON config file layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base preset: cifar or imagenet.
    #[arg(long, global = true, default_value = "cifar")]
    preset: String,
    /// Global strength scale, overrides the config.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Worker threads (default: all cores; bench: 1).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write augmented copies of every image in a directory plus a manifest.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Augmented copies per source image.
        #[arg(long, default_value_t = 1)]
        copies: u64,
        /// Embed recipes in the manifest instead of separate files.
        #[arg(long)]
        inline_recipes: bool,
    },
    /// Replay a manifest and compare every output byte for byte.
    Verify {
        /// Output directory holding manifest.json.
        #[arg(long)]
        output: PathBuf,
    },
    /// Render a grid of augmentations of one image.
    Preview {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long, default_value_t = DEFAULT_SEPARATOR)]
        separator: usize,
    },
    /// Monte-Carlo checks of the sampling laws.
    Validate {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Augmentation throughput on synthetic images.
    Bench {
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long)]
        json: bool,
    },
    /// Coverage of corruption embeddings by augmentation embeddings.
    Fitness {
        /// Binary embedding file or directory of text files.
        #[arg(long)]
        embeddings: PathBuf,
        /// Row label of the percentile table.
        #[arg(long, default_value = "prime")]
        label: String,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn resolve_config(common: &Common) -> Result<PrimeConfig, Failure> {
    let preset = PrimeConfig::preset(&common.preset)?;
    let mut cfg = match &common.config {
        None => preset,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
            let mut merged = serde_json::to_value(&preset).expect("config serializes");
            merge(&mut merged, overlay);
            PrimeConfig::from_json(&merged.to_string())?
        }
    };
    if let Some(alpha) = common.alpha {
        cfg.alpha = alpha;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let cfg = resolve_config(common)?;
    match cli.command {
        Command::Augment {
            input,
            output,
            copies,
            inline_recipes,
        } => {
            let options = AugmentOptions {
                jobs: common.jobs,
                inline_recipes,
            };
            let manifest =
                augment_dataset_with(&input, &output, copies, &cfg, common.seed, &options)?;
            println!(
                "wrote {} images to {} ({} inputs skipped)",
                manifest.entries.len(),
                output.display(),
                manifest.skipped.len()
            );
            for s in &manifest.skipped {
                eprintln!("skipped {}: {}", s.source.display(), s.reason);
            }
        }
        Command::Verify { output } => {
            let report = verify_manifest(&output, common.jobs)?;
            for m in &report.mismatches {
                eprintln!("mismatch {m}");
            }
            println!(
                "{} entries checked, {} mismatches",
                report.checked,
                report.mismatches.len()
            );
            if !report.passed() {
                return Err(Failure::Check(
                    "manifest replay did not reproduce every output".into(),
                ));
            }
        }
        Command::Preview {
            input,
            output,
            rows,
            cols,
            separator,
        } => {
            let img = Image::load(&input)?;
            compose_preview(&img, &cfg, common.seed, rows, cols, separator)?.save_png(&output)?;
            println!("wrote {}", output.display());
        }
        Command::Validate { trials, json } => {
            let report = validate_statistics_with(
                &cfg,
                trials,
                DEFAULT_VALIDATION_SEED ^ common.seed,
                &ValidationHooks::default(),
            )?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{}", report.table());
            }
            if !report.passed() {
                return Err(Failure::Check("statistical validation failed".into()));
            }
        }
        Command::Bench {
            height,
            width,
            count,
            json,
        } => {
            let report = bench_throughput(&cfg, height, width, count, common.jobs.unwrap_or(1))?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{}", report.summary());
            }
        }
        Command::Fitness { embeddings, label } => {
            let set = EmbeddingSet::load(&embeddings)?;
            let report = FitnessReport::from_set(&set);
            println!(
                "N={} C={} T={} d={}: mean {:.6}, median {:.6} over {} pairs",
                set.images(),
                set.corruptions(),
                set.augmentations(),
                set.dim(),
                report.mean,
                report.median,
                report.pairs
            );
            print!("{}", report.table(&label));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}
