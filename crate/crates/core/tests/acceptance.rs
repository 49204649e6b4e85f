//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line per criterion; exits nonzero if any fail.
//!
//! Run with: `cargo test --release -p fundusfuse --test acceptance`

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fundusfuse::channels::{reduce_complexity, vessel_map, AugmentConfig, ModelInput};
use fundusfuse::config::RunConfig;
use fundusfuse::dataset::Split;
use fundusfuse::mask::Region;
use fundusfuse::metrics::{
    confusion, f1_harmonic, pairwise_auc, roc_auc, select_threshold, sens_spec, ScoredSample,
};
use fundusfuse::model::{
    fit_logistic_vcdr, score_inputs, train, BackboneConfig, CnnModel, LogisticConfig, TrainConfig,
    TrainSample,
};
use fundusfuse::pipeline::{preprocess, variant_input};
use fundusfuse::plane::Plane;
use fundusfuse::stats::{compute_stats, green_channel};
use fundusfuse::synth::{generate, SynthConfig};
use fundusfuse::Label;

type CriterionResult = Result<String, String>;
type Criterion = fn() -> CriterionResult;

fn main() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("f1-arithmetic-reproduction", f1_arithmetic),
        ("auc-oracle-equivalence", auc_oracle_equivalence),
        ("gradient-correctness", gradient_correctness),
        ("channel-synthesis-invariants", channel_invariants),
        ("vcdr-geometry", vcdr_geometry),
        ("threshold-selection-oracle", threshold_selection_oracle),
        ("determinism", determinism),
        ("end-to-end-ordering", end_to_end_ordering),
    ];

    let mut failures = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) if detail.is_empty() => println!("[PASS] {name} ({elapsed:.2}s)"),
            Ok(detail) => println!("[PASS] {name} ({elapsed:.2}s) — {detail}"),
            Err(reason) => {
                failures += 1;
                println!("[FAIL] {name} ({elapsed:.2}s) — {reason}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

// ---------------------------------------------------------------------------
// Criterion: harmonic F1 reproduces the reported operating points.
// ---------------------------------------------------------------------------

fn f1_arithmetic() -> CriterionResult {
    let cases = [(0.8655, 0.8457, 0.8555), (0.95, 0.8722, 0.9094)];
    for (sens, spec, expected) in cases {
        let f1 = f1_harmonic(sens, spec);
        if (f1 - expected).abs() > 1e-4 {
            return Err(format!(
                "f1({sens}, {spec}) = {f1}, expected {expected} +- 1e-4"
            ));
        }
    }
    Ok(String::new())
}

// ---------------------------------------------------------------------------
// Criterion: sweep-based AUC equals brute-force Mann-Whitney enumeration.
// ---------------------------------------------------------------------------

fn auc_oracle_equivalence() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(20260808);
    let mut checked = 0;
    while checked < 100 {
        let len = rng.random_range(2..=30usize);
        let samples: Vec<ScoredSample> = (0..len)
            .map(|_| {
                let score = (rng.random_range(0..=20) as f64) / 20.0;
                let label = if rng.random::<f64>() < 0.5 {
                    Label::Glaucoma
                } else {
                    Label::Normal
                };
                ScoredSample::new(score, label)
            })
            .collect();
        let Ok((_, auc)) = roc_auc(&samples) else {
            continue; // single-class draw; resample
        };
        let oracle = pairwise_auc(&samples).unwrap();
        if (auc - oracle).abs() >= 1e-12 {
            return Err(format!(
                "set {checked}: sweep auc {auc} vs pairwise {oracle} (diff {})",
                (auc - oracle).abs()
            ));
        }
        checked += 1;
    }
    Ok("100 random sample sets".into())
}

// ---------------------------------------------------------------------------
// Criterion: analytic gradients match central finite differences.
// ---------------------------------------------------------------------------

fn gradient_correctness() -> CriterionResult {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let config = BackboneConfig::new(5, vec![4]);
        let model = CnnModel::new(config, true, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let inputs: Vec<ModelInput> = (0..2)
            .map(|_| {
                let planes = (0..5)
                    .map(|_| Plane::from_fn(4, 4, |_, _| rng.random_range(-1.0f64..1.0) as f32))
                    .collect();
                ModelInput::new(planes, rng.random_range(0.0..1.0))
            })
            .collect();
        let labels = vec![Label::Glaucoma, Label::Normal];
        let (_, analytic) = model
            .batch_gradients(&inputs, &labels)
            .map_err(|e| e.to_string())?;

        let base = model.parameters();
        let mut probe = model.clone();
        let epsilon = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            plus[i] += epsilon;
            probe.set_parameters(&plus);
            let loss_plus = probe
                .batch_loss(&inputs, &labels)
                .map_err(|e| e.to_string())?;
            let mut minus = base.clone();
            minus[i] -= epsilon;
            probe.set_parameters(&minus);
            let loss_minus = probe
                .batch_loss(&inputs, &labels)
                .map_err(|e| e.to_string())?;
            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            if rel >= 1e-4 {
                return Err(format!(
                    "seed {seed} param {i}: analytic {a}, numeric {numeric}, rel {rel:.2e}"
                ));
            }
        }
    }
    Ok(format!("10 seeds, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Criterion: channel-synthesis invariant suite on 50 random synthetic ROIs.
// ---------------------------------------------------------------------------

fn channel_invariants() -> CriterionResult {
    let samples = generate(&SynthConfig::new(50, 4242)).map_err(|e| e.to_string())?;
    for sample in &samples {
        let green = green_channel(&sample.image);
        let stats = compute_stats(&sample.image, &sample.mask).map_err(|e| e.to_string())?;
        let milestones =
            fundusfuse::channels::milestones(&stats, 20.0).map_err(|e| e.to_string())?;

        // Milestones strictly increasing.
        for pair in milestones.windows(2) {
            if pair[1] <= pair[0] {
                return Err(format!(
                    "sample {}: milestones not increasing",
                    sample.index
                ));
            }
        }

        // Vessel map binary with zeroed background.
        let vessel =
            vessel_map(&green, &sample.mask, stats.threshold).map_err(|e| e.to_string())?;
        for y in 0..vessel.height() {
            for x in 0..vessel.width() {
                let v = vessel.get(x, y);
                if v != 0 && v != 255 {
                    return Err(format!(
                        "sample {}: non-binary vessel value {v}",
                        sample.index
                    ));
                }
                if sample.mask.label_at(x, y) == Region::Background && v != 0 {
                    return Err(format!("sample {}: vessel on background", sample.index));
                }
            }
        }

        // Reduced channel has at most K+2 distinct values.
        let reduced =
            reduce_complexity(&green, &sample.mask, &milestones).map_err(|e| e.to_string())?;
        let mut distinct: Vec<u8> = reduced.values().to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() > milestones.len() + 2 {
            return Err(format!(
                "sample {}: {} distinct reduced values for {} milestones",
                sample.index,
                distinct.len(),
                milestones.len()
            ));
        }

        // Flip equivariance is exact for both synthesized channels.
        let flipped_green = green.flip_horizontal();
        let flipped_mask = sample.mask.flip_horizontal();
        let vessel_flipped = vessel_map(&flipped_green, &flipped_mask, stats.threshold)
            .map_err(|e| e.to_string())?;
        let reduced_flipped = reduce_complexity(&flipped_green, &flipped_mask, &milestones)
            .map_err(|e| e.to_string())?;
        let w = vessel.width();
        for y in 0..vessel.height() {
            for x in 0..w {
                if vessel_flipped.get(x, y) != vessel.get(w - 1 - x, y) {
                    return Err(format!("sample {}: vessel flip mismatch", sample.index));
                }
                if reduced_flipped.get(x, y) != reduced.get(w - 1 - x, y) {
                    return Err(format!("sample {}: reduced flip mismatch", sample.index));
                }
            }
        }
    }
    Ok("50 synthetic ROIs".into())
}

// ---------------------------------------------------------------------------
// Criterion: measured VCDR stays within pixel quantization of the drawn ratio.
// ---------------------------------------------------------------------------

fn vcdr_geometry() -> CriterionResult {
    let samples = generate(&SynthConfig::new(200, 777)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for sample in &samples {
        let measured = sample.mask.vcdr().map_err(|e| e.to_string())?.value();
        // Measured vertical disc diameter in pixels.
        let disc_rows: Vec<u32> = (0..sample.mask.height())
            .filter(|&y| (0..sample.mask.width()).any(|x| sample.mask.is_disc(x, y)))
            .collect();
        let vdd = (disc_rows.last().unwrap() - disc_rows.first().unwrap() + 1) as f64;
        let bound = 2.0 / vdd;
        let err = (measured - sample.drawn_vcdr).abs();
        worst = worst.max(err * vdd / 2.0);
        if err > bound {
            return Err(format!(
                "sample {}: |{measured} - {}| = {err} > 2/{vdd}",
                sample.index, sample.drawn_vcdr
            ));
        }
    }
    Ok(format!("200 masks, worst error {worst:.3} of bound"))
}

// ---------------------------------------------------------------------------
// Criterion: selected threshold dominates a dense grid scan.
// ---------------------------------------------------------------------------

fn threshold_selection_oracle() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for set in 0..50 {
        let mut samples: Vec<ScoredSample> = (0..rng.random_range(20..=120usize))
            .map(|_| {
                let score = (rng.random_range(0..=50) as f64) / 50.0;
                let label = if rng.random::<f64>() < score.clamp(0.1, 0.9) {
                    Label::Glaucoma
                } else {
                    Label::Normal
                };
                ScoredSample::new(score, label)
            })
            .collect();
        samples.push(ScoredSample::new(0.31, Label::Glaucoma));
        samples.push(ScoredSample::new(0.69, Label::Normal));

        let threshold = select_threshold(&samples).map_err(|e| e.to_string())?;
        let (sens, spec) = sens_spec(&confusion(&samples, threshold)).map_err(|e| e.to_string())?;
        let chosen_f1 = f1_harmonic(sens, spec);
        let chosen_feasible = spec > 0.8;

        for step in 0..=10_000u32 {
            let t = step as f64 * 1e-4;
            let (s, p) = sens_spec(&confusion(&samples, t)).map_err(|e| e.to_string())?;
            if p > 0.8 {
                let f1 = f1_harmonic(s, p);
                if !chosen_feasible {
                    return Err(format!(
                        "set {set}: selection infeasible but grid point {t} has spec {p}"
                    ));
                }
                if f1 > chosen_f1 + 1e-12 {
                    return Err(format!(
                        "set {set}: grid threshold {t} gives f1 {f1} > selected {chosen_f1}"
                    ));
                }
            }
        }
    }
    Ok("50 validation sets vs 1e-4 grid".into())
}

// ---------------------------------------------------------------------------
// Criterion: synth / train / eval reproduce byte-identical outputs.
// ---------------------------------------------------------------------------

fn run_binary(args: &[&str]) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_fundusfuse"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    Ok(())
}

fn dir_signature(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                entries.push((rel, bytes));
            }
        }
    }
    entries.sort();
    Ok(entries)
}

fn determinism() -> CriterionResult {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config_path = dir.path().join("run.cfg");
    std::fs::write(
        &config_path,
        "variant = proposed\n\
         epochs = 2\n\
         batch_size = 8\n\
         block_widths = 4\n\
         input_downsample = 16\n\
         seed = 33\n",
    )
    .map_err(|e| e.to_string())?;
    let config = config_path.to_str().unwrap();

    for stage in ["synth", "train", "eval"] {
        let out_a = dir.path().join(format!("{stage}_a"));
        let out_b = dir.path().join(format!("{stage}_b"));
        for out in [&out_a, &out_b] {
            let out_str = out.to_str().unwrap();
            match stage {
                "synth" => {
                    run_binary(&["synth", "--out", out_str, "--count", "30", "--seed", "33"])?
                }
                "train" => run_binary(&[
                    "train",
                    "--config",
                    config,
                    "--manifest",
                    dir.path().join("synth_a/manifest.csv").to_str().unwrap(),
                    "--out",
                    out_str,
                ])?,
                "eval" => run_binary(&[
                    "eval",
                    "--config",
                    config,
                    "--checkpoint",
                    dir.path().join("train_a/model.ckpt").to_str().unwrap(),
                    "--manifest",
                    dir.path().join("synth_a/manifest.csv").to_str().unwrap(),
                    "--split",
                    "test",
                    "--out",
                    out_str,
                ])?,
                _ => unreachable!(),
            }
        }
        let sig_a = dir_signature(&out_a)?;
        let sig_b = dir_signature(&out_b)?;
        if sig_a.len() != sig_b.len() {
            return Err(format!("{stage}: file counts differ"));
        }
        for ((name_a, bytes_a), (name_b, bytes_b)) in sig_a.iter().zip(&sig_b) {
            if name_a != name_b || bytes_a != bytes_b {
                return Err(format!("{stage}: {name_a} differs between runs"));
            }
        }
    }
    Ok("synth, train, eval byte-identical across reruns".into())
}

// ---------------------------------------------------------------------------
// Criterion: end-to-end test-AUC ordering on the overlap-mode dataset.
// ---------------------------------------------------------------------------

const E2E_SAMPLES: usize = 2000;
const E2E_DATASET_SEED: u64 = 20260808;
const E2E_TRAIN_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn e2e_run_config() -> RunConfig {
    RunConfig {
        epochs: 16,
        learning_rate: 0.05,
        momentum: 0.9,
        batch_size: 32,
        blur_sigma_min: 0.3,
        blur_sigma_max: 0.8,
        block_widths: vec![8, 16],
        input_downsample: 8,
        ..RunConfig::default()
    }
}

struct PreppedDataset {
    train: Vec<TrainSample>,
    val: Vec<TrainSample>,
    test: Vec<TrainSample>,
}

fn test_auc(model: &CnnModel, test: &[TrainSample]) -> Result<f64, String> {
    let inputs: Vec<ModelInput> = test.iter().map(|s| s.input.clone()).collect();
    let scores = score_inputs(model, &inputs).map_err(|e| e.to_string())?;
    let scored: Vec<ScoredSample> = scores
        .iter()
        .zip(test)
        .map(|(&score, s)| ScoredSample::new(score, s.label))
        .collect();
    Ok(roc_auc(&scored).map_err(|e| e.to_string())?.1)
}

fn end_to_end_ordering() -> CriterionResult {
    use rayon::prelude::*;

    let synth_cfg = SynthConfig::overlap(E2E_SAMPLES, E2E_DATASET_SEED);
    let samples = generate(&synth_cfg).map_err(|e| e.to_string())?;
    let run_cfg = e2e_run_config();

    // Preprocess once; assemble per variant.
    let preps: Result<Vec<_>, String> = samples
        .par_iter()
        .map(|s| {
            preprocess(&s.image, &s.mask, &run_cfg)
                .map(|prep| (prep, s.label, s.split))
                .map_err(|e| format!("sample {}: {e}", s.index))
        })
        .collect();
    let preps = preps?;

    let build_dataset = |variant: fundusfuse::config::Variant| -> Result<PreppedDataset, String> {
        let inputs: Result<Vec<_>, String> = preps
            .par_iter()
            .map(|(prep, label, split)| {
                variant_input(prep, variant, &run_cfg)
                    .map(|input| (input.downsample(run_cfg.input_downsample), *label, *split))
                    .map_err(|e| e.to_string())
            })
            .collect();
        let mut dataset = PreppedDataset {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (input, label, split) in inputs? {
            let sample = TrainSample { input, label };
            match split {
                Split::Train => dataset.train.push(sample),
                Split::Val => dataset.val.push(sample),
                Split::Test => dataset.test.push(sample),
            }
        }
        Ok(dataset)
    };

    let mut mean_aucs = Vec::new();
    for variant in [
        fundusfuse::config::Variant::Proposed,
        fundusfuse::config::Variant::Fundus,
    ] {
        let dataset = build_dataset(variant)?;
        let mut aucs = Vec::new();
        for &seed in &E2E_TRAIN_SEEDS {
            let backbone = BackboneConfig::new(variant.in_channels(), run_cfg.block_widths.clone());
            let model = CnnModel::new(backbone, variant.uses_vcdr_fusion(), seed)
                .map_err(|e| e.to_string())?;
            let train_cfg = TrainConfig {
                epochs: run_cfg.epochs,
                learning_rate: run_cfg.learning_rate,
                momentum: run_cfg.momentum,
                batch_size: run_cfg.batch_size,
                seed,
                augment: AugmentConfig {
                    flip_probability: run_cfg.flip_probability,
                    blur_probability: run_cfg.blur_probability,
                    blur_sigma: (run_cfg.blur_sigma_min, run_cfg.blur_sigma_max),
                },
            };
            let outcome = train(model, &dataset.train, &dataset.val, &train_cfg)
                .map_err(|e| e.to_string())?;
            aucs.push(test_auc(&outcome.model, &dataset.test)?);
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        mean_aucs.push((variant, mean, aucs));
    }

    // VCDR-only logistic baseline (deterministic; identical across seeds).
    let train_pairs: Vec<(f64, Label)> = samples
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| (s.mask.vcdr().unwrap().value(), s.label))
        .collect();
    let logistic =
        fit_logistic_vcdr(&train_pairs, &LogisticConfig::default()).map_err(|e| e.to_string())?;
    let test_scored: Vec<ScoredSample> = samples
        .iter()
        .filter(|s| s.split == Split::Test)
        .map(|s| ScoredSample::new(logistic.score(s.mask.vcdr().unwrap().value()), s.label))
        .collect();
    let logistic_auc = roc_auc(&test_scored).map_err(|e| e.to_string())?.1;

    let proposed = mean_aucs[0].1;
    let fundus = mean_aucs[1].1;
    let detail = format!(
        "mean test AUC over {} seeds: proposed {proposed:.4}, fundus {fundus:.4}, vcdr_logistic {logistic_auc:.4}",
        E2E_TRAIN_SEEDS.len()
    );
    println!(
        "  end-to-end per-seed AUCs: proposed {:?}, fundus {:?}",
        mean_aucs[0].2, mean_aucs[1].2
    );

    if proposed < 0.90 {
        return Err(format!("{detail}; proposed mean AUC below 0.90"));
    }
    if proposed < fundus {
        return Err(format!("{detail}; proposed < fundus"));
    }
    if proposed < logistic_auc {
        return Err(format!("{detail}; proposed < vcdr_logistic"));
    }
    Ok(detail)
}
