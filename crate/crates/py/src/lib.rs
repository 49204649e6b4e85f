//! Python bindings for the fundusfuse pipeline.
//!
//! Exposes mask parsing and VCDR geometry, per-sample preprocessing (vessel
//! map, reduced channel, region statistics), the evaluation metrics, the
//! VCDR-only logistic baseline, and dataset-level synth/train/eval entry
//! points. Labels cross the boundary as integers: 1 = glaucoma, 0 = normal.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fundusfuse::commands;
use fundusfuse::config::{RunConfig, Variant};
use fundusfuse::dataset::{load_gray, load_rgb, Split};
use fundusfuse::mask::{parse_mask, LabelMap, Region, TriMask};
use fundusfuse::metrics::{self, ScoredSample};
use fundusfuse::model::{fit_logistic_vcdr as fit_logistic, LogisticConfig};
use fundusfuse::pipeline::{preprocess, PrepOutcome};
use fundusfuse::Label;

fn value_err(message: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(message.to_string())
}

fn runtime_err(message: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(message.to_string())
}

fn label_map_from(labels: (u8, u8, u8)) -> LabelMap {
    LabelMap {
        background: labels.0,
        rim: labels.1,
        cup: labels.2,
    }
}

fn label_from_int(value: u8) -> PyResult<Label> {
    match value {
        0 => Ok(Label::Normal),
        1 => Ok(Label::Glaucoma),
        other => Err(value_err(format!("label must be 0 or 1, got {other}"))),
    }
}

fn scored(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<Vec<ScoredSample>> {
    if scores.len() != labels.len() {
        return Err(value_err("scores and labels must have equal length"));
    }
    scores
        .into_iter()
        .zip(labels)
        .map(|(score, label)| Ok(ScoredSample::new(score, label_from_int(label)?)))
        .collect()
}

fn parse_variant(name: &str) -> PyResult<Variant> {
    name.parse()
        .map_err(|_| value_err(format!("unknown variant {name:?}")))
}

fn parse_split(name: &str) -> PyResult<Split> {
    name.parse()
        .map_err(|_| value_err(format!("unknown split {name:?}")))
}

/// Trimap segmentation mask handle.
#[pyclass(name = "TriMask", frozen)]
struct PyTriMask {
    inner: TriMask,
}

#[pymethods]
impl PyTriMask {
    /// Load a trimap from a grayscale PNG. `labels` is the
    /// (background, rim, cup) gray-level triple.
    #[staticmethod]
    #[pyo3(signature = (path, labels = (255, 128, 0)))]
    fn from_png(path: PathBuf, labels: (u8, u8, u8)) -> PyResult<Self> {
        let gray = load_gray(&path).map_err(value_err)?;
        let inner = parse_mask(&gray, &label_map_from(labels)).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    /// Pixel count of one region: "background", "rim" or "cup".
    fn region_size(&self, region: &str) -> PyResult<usize> {
        let region = match region {
            "background" => Region::Background,
            "rim" => Region::Rim,
            "cup" => Region::Cup,
            other => return Err(value_err(format!("unknown region {other:?}"))),
        };
        Ok(self.inner.region_size(region))
    }

    /// Vertical cup-to-disc ratio from row extents.
    fn vcdr(&self) -> PyResult<f64> {
        Ok(self.inner.vcdr().map_err(value_err)?.value())
    }

    /// Region codes as row-major bytes: 0 background, 1 rim, 2 cup.
    fn labels(&self) -> Vec<u8> {
        self.inner
            .labels()
            .iter()
            .map(|r| match r {
                Region::Background => 0,
                Region::Rim => 1,
                Region::Cup => 2,
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "TriMask({}x{}, cup={}, rim={}, background={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.region_size(Region::Cup),
            self.inner.region_size(Region::Rim),
            self.inner.region_size(Region::Background),
        )
    }
}

/// Preprocessing products for one image/mask pair.
#[pyclass(name = "PrepResult", frozen)]
struct PyPrepResult {
    outcome: PrepOutcome,
}

#[pymethods]
impl PyPrepResult {
    #[getter]
    fn back_mean(&self) -> f64 {
        self.outcome.back_mean
    }

    #[getter]
    fn rim_mean(&self) -> f64 {
        self.outcome.rim_mean
    }

    /// `None` when the mask has no cup pixels.
    #[getter]
    fn cup_mean(&self) -> Option<f64> {
        self.outcome.cup_mean
    }

    /// Adaptive vessel threshold derived from the background and rim means.
    #[getter]
    fn threshold(&self) -> f64 {
        self.outcome.threshold
    }

    #[getter]
    fn vcdr(&self) -> f64 {
        self.outcome.vcdr.value()
    }

    /// Output levels of the quantized channel, one per bin.
    #[getter]
    fn palette(&self) -> Vec<u8> {
        self.outcome.reduced.palette().to_vec()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.outcome.vessel.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.outcome.vessel.height()
    }

    /// Binary vessel map as row-major bytes (0 or 255).
    fn vessel_bytes(&self) -> Vec<u8> {
        self.outcome.vessel.values().to_vec()
    }

    /// Quantized channel as row-major bytes.
    fn reduced_bytes(&self) -> Vec<u8> {
        self.outcome.reduced.values().to_vec()
    }

    /// ROI trimap region codes: 0 background, 1 rim, 2 cup.
    fn mask_labels(&self) -> Vec<u8> {
        self.outcome
            .trimask
            .labels()
            .iter()
            .map(|r| match r {
                Region::Background => 0,
                Region::Rim => 1,
                Region::Cup => 2,
            })
            .collect()
    }

    fn save_vessel_png(&self, path: PathBuf) -> PyResult<()> {
        self.outcome
            .vessel
            .to_gray_image()
            .save(&path)
            .map_err(runtime_err)
    }

    fn save_reduced_png(&self, path: PathBuf) -> PyResult<()> {
        self.outcome
            .reduced
            .to_gray_image()
            .save(&path)
            .map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PrepResult(vcdr={:.4}, threshold={:.2}, palette_len={})",
            self.outcome.vcdr.value(),
            self.outcome.threshold,
            self.outcome.reduced.palette().len()
        )
    }
}

/// Crop the disc-centered ROI and derive statistics, vessel map, quantized
/// channel and VCDR for one image/mask pair.
#[pyfunction]
#[pyo3(signature = (image_path, mask_path, band = 20.0, labels = (255, 128, 0)))]
fn preprocess_sample(
    image_path: PathBuf,
    mask_path: PathBuf,
    band: f64,
    labels: (u8, u8, u8),
) -> PyResult<PyPrepResult> {
    let cfg = RunConfig {
        milestone_band: band,
        label_background: labels.0,
        label_rim: labels.1,
        label_cup: labels.2,
        ..RunConfig::default()
    };
    cfg.validate().map_err(value_err)?;
    let image = load_rgb(&image_path).map_err(value_err)?;
    let mask = load_gray(&mask_path).map_err(value_err)?;
    let mask = parse_mask(&mask, &cfg.label_map()).map_err(value_err)?;
    let outcome = preprocess(&image, &mask, &cfg).map_err(runtime_err)?;
    Ok(PyPrepResult { outcome })
}

/// Quantization milestones around the three region means.
#[pyfunction]
#[pyo3(signature = (back_mean, rim_mean, cup_mean, band = 20.0))]
fn milestones(back_mean: f64, rim_mean: f64, cup_mean: f64, band: f64) -> PyResult<Vec<f64>> {
    fundusfuse::channels::milestones_from_levels(&[back_mean, rim_mean, cup_mean], band)
        .map_err(value_err)
}

/// Harmonic mean of sensitivity and specificity.
#[pyfunction]
fn f1_harmonic(sensitivity: f64, specificity: f64) -> f64 {
    metrics::f1_harmonic(sensitivity, specificity)
}

/// `(auc, [(fpr, tpr), ...])` for scores with integer labels (1 = glaucoma).
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let samples = scored(scores, labels)?;
    let (points, auc) = metrics::roc_auc(&samples).map_err(value_err)?;
    Ok((auc, points))
}

/// Validation threshold rule: maximize harmonic F1 subject to specificity
/// strictly above 0.8.
#[pyfunction]
fn select_threshold(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    let samples = scored(scores, labels)?;
    metrics::select_threshold(&samples).map_err(value_err)
}

/// Fit the VCDR-only logistic baseline; returns `(slope, intercept)`.
#[pyfunction]
#[pyo3(signature = (vcdrs, labels, iterations = 500, learning_rate = 1.0))]
fn fit_logistic_vcdr(
    vcdrs: Vec<f64>,
    labels: Vec<u8>,
    iterations: usize,
    learning_rate: f64,
) -> PyResult<(f64, f64)> {
    if vcdrs.len() != labels.len() {
        return Err(value_err("vcdrs and labels must have equal length"));
    }
    let pairs: PyResult<Vec<(f64, Label)>> = vcdrs
        .into_iter()
        .zip(labels)
        .map(|(v, l)| Ok((v, label_from_int(l)?)))
        .collect();
    let model = fit_logistic(
        &pairs?,
        &LogisticConfig {
            iterations,
            learning_rate,
        },
    )
    .map_err(value_err)?;
    Ok((model.slope, model.intercept))
}

/// Generate a synthetic phantom dataset; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, count, seed = 0, overlap = false))]
fn synth_dataset(out_dir: PathBuf, count: usize, seed: u64, overlap: bool) -> PyResult<String> {
    let cfg = RunConfig {
        synth_samples: count,
        seed,
        synth_overlap: overlap,
        ..RunConfig::default()
    };
    let summary = commands::run_synth(&cfg, &out_dir).map_err(runtime_err)?;
    Ok(summary.manifest_path.display().to_string())
}

/// Train a variant on a manifest; returns a dict with checkpoint path,
/// log path, best epoch and best validation AUC.
#[pyfunction]
#[pyo3(signature = (
    manifest,
    out_dir,
    variant = "proposed",
    seed = 0,
    epochs = 20,
    learning_rate = 0.05,
    batch_size = 32,
    block_widths = vec![8, 16],
    input_downsample = 8,
))]
#[allow(clippy::too_many_arguments)]
fn train_model<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    out_dir: PathBuf,
    variant: &str,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    block_widths: Vec<usize>,
    input_downsample: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig {
        variant: parse_variant(variant)?,
        seed,
        epochs,
        learning_rate,
        batch_size,
        block_widths,
        input_downsample,
        ..RunConfig::default()
    };
    cfg.validate().map_err(value_err)?;
    let summary = commands::run_train(&cfg, &manifest, &out_dir).map_err(runtime_err)?;
    let dict = PyDict::new(py);
    dict.set_item("checkpoint", summary.checkpoint_path.display().to_string())?;
    dict.set_item("log", summary.log_path.display().to_string())?;
    dict.set_item("best_val_auc", summary.best_val_auc)?;
    dict.set_item("best_epoch", summary.best_epoch)?;
    Ok(dict)
}

/// Evaluate a checkpoint on one split (threshold chosen on the validation
/// split); returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (checkpoint, manifest, out_dir, split = "test", input_downsample = 8, block_widths = vec![8, 16]))]
fn evaluate_checkpoint<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    manifest: PathBuf,
    out_dir: PathBuf,
    split: &str,
    input_downsample: u32,
    block_widths: Vec<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig {
        input_downsample,
        block_widths,
        ..RunConfig::default()
    };
    cfg.validate().map_err(value_err)?;
    let split = parse_split(split)?;
    let summary = commands::run_eval(&cfg, None, &checkpoint, &manifest, split, &out_dir)
        .map_err(runtime_err)?;
    let report = &summary.report;
    let dict = PyDict::new(py);
    dict.set_item("auc", report.auc)?;
    dict.set_item("threshold", report.threshold)?;
    dict.set_item("sensitivity", report.sensitivity)?;
    dict.set_item("specificity", report.specificity)?;
    dict.set_item("f1", report.f1)?;
    dict.set_item("report_csv", summary.report_path.display().to_string())?;
    dict.set_item("roc_csv", summary.roc_path.display().to_string())?;
    Ok(dict)
}

/// Compute the VCDR of a mask PNG directly.
#[pyfunction]
#[pyo3(signature = (mask_path, labels = (255, 128, 0)))]
fn vcdr_from_png(mask_path: PathBuf, labels: (u8, u8, u8)) -> PyResult<f64> {
    PyTriMask::from_png(mask_path, labels)?.vcdr()
}

fn manifest_vcdr_pairs(manifest: &Path, split: Split) -> PyResult<(Vec<f64>, Vec<u8>)> {
    let cfg = RunConfig::default();
    let manifest = fundusfuse::dataset::Manifest::load(manifest).map_err(value_err)?;
    let pairs =
        fundusfuse::pipeline::collect_vcdr_pairs(&manifest, split, &cfg).map_err(runtime_err)?;
    Ok(pairs
        .into_iter()
        .map(|(v, l)| (v, if l.is_positive() { 1u8 } else { 0u8 }))
        .unzip())
}

/// `(vcdrs, labels)` of one manifest split; labels are 1 for glaucoma.
#[pyfunction]
#[pyo3(signature = (manifest, split = "train"))]
fn collect_vcdr_pairs(manifest: PathBuf, split: &str) -> PyResult<(Vec<f64>, Vec<u8>)> {
    manifest_vcdr_pairs(&manifest, parse_split(split)?)
}

#[pymodule]
fn fundusfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTriMask>()?;
    m.add_class::<PyPrepResult>()?;
    m.add_function(wrap_pyfunction!(preprocess_sample, m)?)?;
    m.add_function(wrap_pyfunction!(milestones, m)?)?;
    m.add_function(wrap_pyfunction!(f1_harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(select_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic_vcdr, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(vcdr_from_png, m)?)?;
    m.add_function(wrap_pyfunction!(collect_vcdr_pairs, m)?)?;
    Ok(())
}
