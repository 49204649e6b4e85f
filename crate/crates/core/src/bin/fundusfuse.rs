//! Command-line front end: `synth`, `prep`, `train`, `eval`, `roc`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fundusfuse::commands::{self, CommandError};
use fundusfuse::config::{RunConfig, Variant};
use fundusfuse::dataset::Split;

#[derive(Parser)]
#[command(
    name = "fundusfuse",
    about = "Glaucoma screening pipeline fusing fundus channels with disc/cup mask geometry",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to a `key = value` config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model variant (overrides the config file).
    #[arg(long)]
    variant: Option<String>,
    /// RNG seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom dataset with ground-truth masks.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output directory for images/, masks/ and manifest.csv.
        #[arg(long)]
        out: PathBuf,
        /// Number of samples (overrides `synth_samples`).
        #[arg(long)]
        count: Option<usize>,
        /// Overlapping class VCDR ranges (overrides `synth_overlap`).
        #[arg(long)]
        overlap: bool,
    },
    /// Preprocess a manifest: ROI, trimap, vessel and reduced PNGs + stats CSV.
    Prep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured variant; saves the best-validation-AUC checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint: threshold from the validation split, report on
    /// the requested split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Split to report on.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC curve and AUC from a standalone `score,label` CSV.
    Roc {
        /// Input CSV with header `score,label`.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(text: &str) -> Result<Variant, CommandError> {
    text.parse()
        .map_err(|_| CommandError::Usage(format!("unknown variant {text:?}")))
}

fn load_config(common: &Common) -> Result<(RunConfig, Option<Variant>), CommandError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let explicit_variant = match &common.variant {
        Some(text) => {
            let variant = parse_variant(text)?;
            cfg.variant = variant;
            Some(variant)
        }
        None => None,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok((cfg, explicit_variant))
}

fn parse_split(text: &str) -> Result<Split, CommandError> {
    text.parse()
        .map_err(|_| CommandError::Usage(format!("unknown split {text:?}")))
}

fn run(command: Command) -> Result<(), CommandError> {
    match command {
        Command::Synth {
            common,
            out,
            count,
            overlap,
        } => {
            let (mut cfg, _) = load_config(&common)?;
            if let Some(count) = count {
                cfg.synth_samples = count;
            }
            if overlap {
                cfg.synth_overlap = true;
            }
            let summary = commands::run_synth(&cfg, &out)?;
            println!(
                "wrote {} samples, manifest at {}",
                summary.n_samples,
                summary.manifest_path.display()
            );
        }
        Command::Prep {
            common,
            manifest,
            out,
        } => {
            let (cfg, _) = load_config(&common)?;
            let summary = commands::run_prep(&cfg, &manifest, &out)?;
            println!(
                "prepped {} rows ({} failed), stats at {}",
                summary.rows_ok,
                summary.rows_failed,
                summary.stats_path.display()
            );
        }
        Command::Train {
            common,
            manifest,
            out,
        } => {
            let (cfg, _) = load_config(&common)?;
            let summary = commands::run_train(&cfg, &manifest, &out)?;
            println!(
                "trained {} (best val AUC {:.4} at epoch {}), checkpoint at {}",
                cfg.variant,
                summary.best_val_auc,
                summary.best_epoch,
                summary.checkpoint_path.display()
            );
        }
        Command::Eval {
            common,
            checkpoint,
            manifest,
            split,
            out,
        } => {
            let (cfg, explicit_variant) = load_config(&common)?;
            let split = parse_split(&split)?;
            let summary =
                commands::run_eval(&cfg, explicit_variant, &checkpoint, &manifest, split, &out)?;
            let r = &summary.report;
            println!(
                "auc {:.4} | threshold {:.4} | sensitivity {:.4} | specificity {:.4} | f1 {:.4}",
                r.auc, r.threshold, r.sensitivity, r.specificity, r.f1
            );
            println!(
                "report at {}, roc at {}",
                summary.report_path.display(),
                summary.roc_path.display()
            );
        }
        Command::Roc { scores, out } => {
            let summary = commands::run_roc(&scores, &out)?;
            println!(
                "auc {:.6}, roc at {}",
                summary.auc,
                summary.roc_path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Keep clap's rendered help/usage text but exit 1 on misuse.
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
