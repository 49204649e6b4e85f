//! Subcommand implementations behind the `fundusfuse` binary. Each returns a
//! structured summary so integration tests can drive them without spawning a
//! process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, RunConfig, Variant};
use crate::dataset::{DataError, Manifest, Split};
use crate::metrics::{evaluate, roc_auc, select_threshold, EvalReport, MetricsError, ScoredSample};
use crate::model::{
    fit_logistic_vcdr, load_checkpoint, save_checkpoint, train, Checkpoint, CheckpointError,
    CnnModel, ModelError, TrainOutcome,
};
use crate::pipeline::{
    build_training_samples, collect_vcdr_pairs, prep_row, score_split, PipelineError,
};
use crate::synth::{generate, write_dataset, SynthConfig, SynthError};
use crate::Label;

/// Failure classification used for process exit codes: usage 1, data 2,
/// numeric 3.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 1,
            CommandError::Data(_) => 2,
            CommandError::Numeric(_) => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> CommandError {
        CommandError::Data(format!("{}: {source}", path.display()))
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Usage(e.to_string())
    }
}

impl From<DataError> for CommandError {
    fn from(e: DataError) -> Self {
        CommandError::Data(e.to_string())
    }
}

impl From<SynthError> for CommandError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CommandError::Usage(e.to_string()),
            SynthError::Data(inner) => CommandError::Data(inner.to_string()),
        }
    }
}

impl From<PipelineError> for CommandError {
    fn from(e: PipelineError) -> Self {
        if e.is_data_error() {
            CommandError::Data(e.to_string())
        } else {
            CommandError::Numeric(e.to_string())
        }
    }
}

impl From<ModelError> for CommandError {
    fn from(e: ModelError) -> Self {
        CommandError::Numeric(e.to_string())
    }
}

impl From<MetricsError> for CommandError {
    fn from(e: MetricsError) -> Self {
        CommandError::Numeric(e.to_string())
    }
}

impl From<CheckpointError> for CommandError {
    fn from(e: CheckpointError) -> Self {
        CommandError::Data(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CommandError> {
    std::fs::write(path, contents).map_err(|e| CommandError::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<(), CommandError> {
    std::fs::create_dir_all(path).map_err(|e| CommandError::io(path, e))
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct SynthSummary {
    pub manifest_path: PathBuf,
    pub n_samples: usize,
}

/// Generate a synthetic dataset under `out`.
pub fn run_synth(cfg: &RunConfig, out: &Path) -> Result<SynthSummary, CommandError> {
    ensure_dir(out)?;
    let synth_cfg = if cfg.synth_overlap {
        SynthConfig::overlap(cfg.synth_samples, cfg.seed)
    } else {
        SynthConfig::new(cfg.synth_samples, cfg.seed)
    };
    let samples = generate(&synth_cfg)?;
    let manifest_path = write_dataset(&samples, out, &cfg.label_map())?;
    Ok(SynthSummary {
        manifest_path,
        n_samples: samples.len(),
    })
}

// ---------------------------------------------------------------------------
// prep
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct PrepSummary {
    pub stats_path: PathBuf,
    pub rows_ok: usize,
    pub rows_failed: usize,
    pub warnings: Vec<String>,
}

/// Preprocess every manifest row: dump ROI, trimap, vessel and reduced PNGs
/// plus one stats CSV row per sample. Failing rows are reported and skipped;
/// the remaining rows still process.
pub fn run_prep(
    cfg: &RunConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<PrepSummary, CommandError> {
    let manifest = Manifest::load(manifest_path)?;
    ensure_dir(out)?;
    let mut stats_csv = String::from("id,back_mean,rim_mean,cup_mean,threshold,vcdr\n");
    let mut rows_ok = 0usize;
    let mut rows_failed = 0usize;
    let mut warnings = Vec::new();
    for (index, row) in manifest.rows().iter().enumerate() {
        let stem = row
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("row{index:05}"));
        match prep_row(&manifest, row, cfg) {
            Ok(prep) => {
                let save = |img: image::GrayImage, suffix: &str| -> Result<(), CommandError> {
                    let path = out.join(format!("{stem}_{suffix}.png"));
                    img.save(&path)
                        .map_err(|e| CommandError::Data(format!("{}: {e}", path.display())))
                };
                let roi_path = out.join(format!("{stem}_roi.png"));
                prep.roi
                    .image()
                    .save(&roi_path)
                    .map_err(|e| CommandError::Data(format!("{}: {e}", roi_path.display())))?;
                save(prep.trimask.render(&cfg.label_map()), "trimap")?;
                save(prep.vessel.to_gray_image(), "vessel")?;
                save(prep.reduced.to_gray_image(), "reduced")?;
                let cup_field = match prep.cup_mean {
                    Some(c) => format!("{c:.6}"),
                    None => {
                        let warning =
                            format!("{stem}: empty cup, VCDR set to 0 and cup milestones omitted");
                        eprintln!("warning: {warning}");
                        warnings.push(warning);
                        String::new()
                    }
                };
                writeln!(
                    stats_csv,
                    "{stem},{:.6},{:.6},{cup_field},{:.6},{:.6}",
                    prep.back_mean,
                    prep.rim_mean,
                    prep.threshold,
                    prep.vcdr.value()
                )
                .expect("string write cannot fail");
                rows_ok += 1;
            }
            Err(err) => {
                eprintln!("error: row {index} ({}): {err}", row.image.display());
                rows_failed += 1;
            }
        }
    }
    let stats_path = out.join("stats.csv");
    write_file(&stats_path, &stats_csv)?;
    Ok(PrepSummary {
        stats_path,
        rows_ok,
        rows_failed,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct TrainSummary {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub best_val_auc: f64,
    pub best_epoch: usize,
}

fn nonempty_split(manifest: &Manifest, split: Split) -> Result<(), CommandError> {
    if manifest.split_rows(split).is_empty() {
        return Err(CommandError::Data(format!("{split} split is empty")));
    }
    Ok(())
}

/// Train the configured variant and save the best-validation-AUC checkpoint
/// plus the per-epoch CSV log.
pub fn run_train(
    cfg: &RunConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<TrainSummary, CommandError> {
    let manifest = Manifest::load(manifest_path)?;
    nonempty_split(&manifest, Split::Train)?;
    nonempty_split(&manifest, Split::Val)?;
    ensure_dir(out)?;

    let mut log_csv = String::from("epoch,train_loss,val_auc\n");
    let checkpoint_path = out.join("model.ckpt");
    let log_path = out.join("train_log.csv");

    let (checkpoint, best_val_auc, best_epoch) = if cfg.variant.is_logistic() {
        let train_pairs = collect_vcdr_pairs(&manifest, Split::Train, cfg)?;
        let model = fit_logistic_vcdr(&train_pairs, &cfg.logistic_config())?;
        let val_pairs = collect_vcdr_pairs(&manifest, Split::Val, cfg)?;
        let val_scored: Vec<ScoredSample> = val_pairs
            .iter()
            .map(|&(v, label)| ScoredSample::new(model.score(v), label))
            .collect();
        let (_, val_auc) = roc_auc(&val_scored)?;
        let train_loss = logistic_nll(&model, &train_pairs);
        writeln!(log_csv, "1,{train_loss:.6},{val_auc:.6}").expect("string write cannot fail");
        (
            Checkpoint::Logistic {
                variant: cfg.variant,
                model,
            },
            val_auc,
            1,
        )
    } else {
        let train_set = build_training_samples(
            &manifest,
            Split::Train,
            cfg.variant,
            cfg.input_downsample,
            cfg,
        )?;
        let val_set = build_training_samples(
            &manifest,
            Split::Val,
            cfg.variant,
            cfg.input_downsample,
            cfg,
        )?;
        let model = CnnModel::new(
            cfg.backbone_config(),
            cfg.variant.uses_vcdr_fusion(),
            cfg.seed,
        )?;
        let TrainOutcome {
            model,
            log,
            best_epoch,
            best_val_auc,
        } = train(model, &train_set, &val_set, &cfg.train_config())?;
        for record in &log {
            writeln!(
                log_csv,
                "{},{:.6},{:.6}",
                record.epoch, record.train_loss, record.val_auc
            )
            .expect("string write cannot fail");
        }
        (
            Checkpoint::Cnn {
                variant: cfg.variant,
                input_downsample: cfg.input_downsample,
                model,
            },
            best_val_auc,
            best_epoch,
        )
    };

    save_checkpoint(&checkpoint_path, &checkpoint)?;
    write_file(&log_path, &log_csv)?;
    Ok(TrainSummary {
        checkpoint_path,
        log_path,
        best_val_auc,
        best_epoch,
    })
}

fn logistic_nll(model: &crate::model::LogisticVcdr, pairs: &[(f64, Label)]) -> f64 {
    let mut total = 0.0;
    for &(vcdr, label) in pairs {
        let p = model.score(vcdr).clamp(1e-12, 1.0 - 1e-12);
        total -= if label.is_positive() {
            p.ln()
        } else {
            (1.0 - p).ln()
        };
    }
    total / pairs.len() as f64
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct EvalSummary {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub roc_path: PathBuf,
}

fn check_compatibility(
    cfg: &RunConfig,
    explicit_variant: Option<Variant>,
    checkpoint: &Checkpoint,
) -> Result<(), CommandError> {
    if let Some(requested) = explicit_variant {
        if requested != checkpoint.variant() {
            return Err(CommandError::Data(format!(
                "checkpoint was trained as {} but {requested} was requested",
                checkpoint.variant()
            )));
        }
    }
    if let Checkpoint::Cnn {
        input_downsample,
        model,
        ..
    } = checkpoint
    {
        if *input_downsample != cfg.input_downsample {
            return Err(CommandError::Data(format!(
                "checkpoint expects input_downsample = {input_downsample}, config has {}",
                cfg.input_downsample
            )));
        }
        let widths = &model.config().block_widths;
        if widths != &cfg.block_widths {
            return Err(CommandError::Data(format!(
                "checkpoint backbone {widths:?} does not match configured {:?}",
                cfg.block_widths
            )));
        }
    }
    Ok(())
}

/// Select the operating threshold on the validation split, then evaluate the
/// requested split and write `report.csv` plus `roc.csv`.
pub fn run_eval(
    cfg: &RunConfig,
    explicit_variant: Option<Variant>,
    checkpoint_path: &Path,
    manifest_path: &Path,
    split: Split,
    out: &Path,
) -> Result<EvalSummary, CommandError> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    check_compatibility(cfg, explicit_variant, &checkpoint)?;
    let manifest = Manifest::load(manifest_path)?;
    ensure_dir(out)?;

    let validation = score_split(&checkpoint, &manifest, Split::Val, cfg)?;
    let threshold = select_threshold(&validation)?;
    let target = if split == Split::Val {
        validation
    } else {
        score_split(&checkpoint, &manifest, split, cfg)?
    };
    let report = evaluate(&target, threshold)?;

    let mut report_csv = String::from("auc,threshold,sensitivity,specificity,f1,tp,fn,tn,fp\n");
    writeln!(
        report_csv,
        "{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
        report.auc,
        report.threshold,
        report.sensitivity,
        report.specificity,
        report.f1,
        report.counts.true_pos,
        report.counts.false_neg,
        report.counts.true_neg,
        report.counts.false_pos
    )
    .expect("string write cannot fail");
    let report_path = out.join("report.csv");
    write_file(&report_path, &report_csv)?;

    let roc_path = out.join("roc.csv");
    write_file(&roc_path, &roc_points_csv(&report.roc_points))?;

    Ok(EvalSummary {
        report,
        report_path,
        roc_path,
    })
}

fn roc_points_csv(points: &[(f64, f64)]) -> String {
    let mut csv = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        writeln!(csv, "{fpr:.6},{tpr:.6}").expect("string write cannot fail");
    }
    csv
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct RocSummary {
    pub auc: f64,
    pub roc_path: PathBuf,
}

/// Compute a ROC curve from a standalone scores CSV (`score,label` header,
/// labels `glaucoma` / `normal`).
pub fn run_roc(scores_path: &Path, out: &Path) -> Result<RocSummary, CommandError> {
    let text =
        std::fs::read_to_string(scores_path).map_err(|e| CommandError::io(scores_path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "score,label" => {}
        _ => {
            return Err(CommandError::Data(format!(
                "{}: expected header `score,label`",
                scores_path.display()
            )))
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((score_text, label_text)) = line.split_once(',') else {
            return Err(CommandError::Data(format!(
                "{} line {line_no}: expected `score,label`",
                scores_path.display()
            )));
        };
        let score: f64 = score_text.trim().parse().map_err(|_| {
            CommandError::Data(format!(
                "{} line {line_no}: bad score {score_text:?}",
                scores_path.display()
            ))
        })?;
        let label: Label = label_text.trim().parse().map_err(|_| {
            CommandError::Data(format!(
                "{} line {line_no}: bad label {label_text:?}",
                scores_path.display()
            ))
        })?;
        samples.push(ScoredSample::new(score, label));
    }
    let (points, auc) = roc_auc(&samples)?;
    ensure_dir(out)?;
    let roc_path = out.join("roc.csv");
    write_file(&roc_path, &roc_points_csv(&points))?;
    Ok(RocSummary { auc, roc_path })
}
