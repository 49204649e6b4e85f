//! Per-sample preprocessing shared by the CLI subcommands and the Python
//! bindings: crop, statistics, channel synthesis, and per-variant input
//! assembly.

use std::path::PathBuf;

use image::RgbImage;
use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{
    assemble, milestones_from_levels, reduce_complexity, vessel_map_with_polarity, ChannelError,
    ModelInput, ReducedChannel, VesselMap,
};
use crate::config::{RunConfig, Variant};
use crate::dataset::{
    crop_roi, load_mask, load_rgb, DataError, Manifest, ManifestRow, RoiImage, Split, ROI_SIZE,
};
use crate::mask::{MaskError, Region, TriMask, VcdrValue};
use crate::metrics::{MetricsError, ScoredSample};
use crate::model::{Checkpoint, ModelError, TrainSample};
use crate::plane::Plane;
use crate::stats::{green_channel, region_mean, vessel_threshold, StatsError};
use crate::Label;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("row {index} ({image}): {source}")]
    Row {
        index: usize,
        image: PathBuf,
        source: Box<PipelineError>,
    },
    #[error("checkpoint incompatible with run config: {0}")]
    CheckpointMismatch(String),
}

impl PipelineError {
    fn with_row(self, index: usize, image: PathBuf) -> PipelineError {
        PipelineError::Row {
            index,
            image,
            source: Box::new(self),
        }
    }

    /// True when the failure is bad input data rather than a numeric or
    /// configuration problem.
    pub fn is_data_error(&self) -> bool {
        match self {
            PipelineError::Data(_) | PipelineError::Mask(_) => true,
            PipelineError::Row { source, .. } => source.is_data_error(),
            PipelineError::CheckpointMismatch(_) => true,
            _ => false,
        }
    }
}

/// Everything the preprocessing stage derives from one image/mask pair.
#[derive(Debug, Clone)]
pub struct PrepOutcome {
    pub roi: RoiImage,
    pub trimask: TriMask,
    pub back_mean: f64,
    pub rim_mean: f64,
    /// `None` when the mask has no cup pixels; the cup milestone pair is
    /// omitted in that case and the VCDR is zero.
    pub cup_mean: Option<f64>,
    pub threshold: f64,
    pub vcdr: VcdrValue,
    pub vessel: VesselMap,
    pub reduced: ReducedChannel,
}

/// Crop to the ROI and derive statistics, vessel map, reduced channel and
/// VCDR. An empty cup degrades gracefully (VCDR 0, cup milestones omitted);
/// empty background or rim is an error because the vessel threshold would be
/// undefined.
pub fn preprocess(
    image: &RgbImage,
    mask: &TriMask,
    cfg: &RunConfig,
) -> Result<PrepOutcome, PipelineError> {
    let (roi_rgb, trimask) = crop_roi(image, mask, ROI_SIZE)?;
    let roi = RoiImage::new(roi_rgb)?;
    let green = green_channel(roi.image());

    let back_coords = trimask.region_coords(Region::Background);
    let rim_coords = trimask.region_coords(Region::Rim);
    let cup_coords = trimask.region_coords(Region::Cup);
    if back_coords.is_empty() {
        return Err(StatsError::EmptyRegion(Region::Background).into());
    }
    if rim_coords.is_empty() {
        return Err(StatsError::EmptyRegion(Region::Rim).into());
    }
    let back_mean = region_mean(&green, &back_coords)?;
    let rim_mean = region_mean(&green, &rim_coords)?;
    let cup_mean = if cup_coords.is_empty() {
        None
    } else {
        Some(region_mean(&green, &cup_coords)?)
    };
    let threshold = vessel_threshold(back_mean, rim_mean);
    // VCDR comes from the native mask grid, before any crop or resampling.
    let vcdr = mask.vcdr()?;

    let vessel = vessel_map_with_polarity(&green, &trimask, threshold, cfg.vessel_polarity)?;
    let mut levels = vec![back_mean, rim_mean];
    if let Some(cup) = cup_mean {
        levels.push(cup);
    }
    let milestones = milestones_from_levels(&levels, cfg.milestone_band)?;
    let reduced = reduce_complexity(&green, &trimask, &milestones)?;

    Ok(PrepOutcome {
        roi,
        trimask,
        back_mean,
        rim_mean,
        cup_mean,
        threshold,
        vcdr,
        vessel,
        reduced,
    })
}

fn normalized_rgb_planes(roi: &RoiImage, cfg: &RunConfig) -> Vec<Plane> {
    let norm = cfg.normalization();
    (0..3)
        .map(|c| {
            let img = roi.image();
            Plane::from_fn(img.width(), img.height(), |x, y| {
                (((img.get_pixel(x, y).0[c] as f64) / 255.0 - norm.mean[c]) / norm.std[c]) as f32
            })
        })
        .collect()
}

fn mask_render_planes(trimask: &TriMask, cfg: &RunConfig) -> Vec<Plane> {
    let map = cfg.label_map();
    let rendered = Plane::from_fn(trimask.width(), trimask.height(), |x, y| {
        map.gray_for(trimask.label_at(x, y)) as f32
    });
    // Repeated mask channels are synthetic; standardize like the other
    // synthesized planes.
    let normalized = Plane::from_vec(
        rendered.width(),
        rendered.height(),
        rendered
            .data()
            .iter()
            .map(|&v| (((v as f64) / 255.0 - 0.5) / 0.5) as f32)
            .collect(),
    );
    vec![normalized.clone(), normalized.clone(), normalized]
}

/// Build the model input a variant consumes, at full ROI resolution.
pub fn variant_input(
    prep: &PrepOutcome,
    variant: Variant,
    cfg: &RunConfig,
) -> Result<ModelInput, PipelineError> {
    let vcdr = prep.vcdr.value();
    let input = match variant {
        Variant::Proposed => assemble(
            &prep.roi,
            &prep.vessel,
            &prep.reduced,
            prep.vcdr,
            &cfg.normalization(),
        )?,
        Variant::FundusVcdr | Variant::Fundus => {
            ModelInput::new(normalized_rgb_planes(&prep.roi, cfg), vcdr)
        }
        Variant::MaskVcdr | Variant::Mask => {
            ModelInput::new(mask_render_planes(&prep.trimask, cfg), vcdr)
        }
        Variant::VcdrLogistic => {
            return Err(PipelineError::Model(ModelError::InvalidConfig(
                "the logistic variant consumes VCDR scalars, not image tensors".into(),
            )))
        }
    };
    Ok(input)
}

/// Load and preprocess one manifest row.
pub fn prep_row(
    manifest: &Manifest,
    row: &ManifestRow,
    cfg: &RunConfig,
) -> Result<PrepOutcome, PipelineError> {
    let image = load_rgb(&manifest.resolve(&row.image))?;
    let mask = load_mask(&manifest.resolve(&row.mask), &cfg.label_map())?;
    preprocess(&image, &mask, cfg)
}

/// Preprocess a whole split into training samples for a CNN variant,
/// downsampling each assembled input by `downsample`.
pub fn build_training_samples(
    manifest: &Manifest,
    split: Split,
    variant: Variant,
    downsample: u32,
    cfg: &RunConfig,
) -> Result<Vec<TrainSample>, PipelineError> {
    let rows = manifest.split_rows(split);
    rows.par_iter()
        .enumerate()
        .map(|(index, row)| {
            let build = || -> Result<TrainSample, PipelineError> {
                let prep = prep_row(manifest, row, cfg)?;
                let input = variant_input(&prep, variant, cfg)?.downsample(downsample);
                Ok(TrainSample {
                    input,
                    label: row.label,
                })
            };
            build().map_err(|e| e.with_row(index, row.image.clone()))
        })
        .collect()
}

/// VCDR/label pairs of a split, for the logistic baseline.
pub fn collect_vcdr_pairs(
    manifest: &Manifest,
    split: Split,
    cfg: &RunConfig,
) -> Result<Vec<(f64, Label)>, PipelineError> {
    let rows = manifest.split_rows(split);
    rows.par_iter()
        .enumerate()
        .map(|(index, row)| {
            let build = || -> Result<(f64, Label), PipelineError> {
                let mask = load_mask(&manifest.resolve(&row.mask), &cfg.label_map())?;
                // VCDR is measured on the native mask grid, before any crop
                // or resampling.
                let vcdr = mask.vcdr()?;
                Ok((vcdr.value(), row.label))
            };
            build().map_err(|e| e.with_row(index, row.image.clone()))
        })
        .collect()
}

/// Score every row of a split with a trained checkpoint.
pub fn score_split(
    checkpoint: &Checkpoint,
    manifest: &Manifest,
    split: Split,
    cfg: &RunConfig,
) -> Result<Vec<ScoredSample>, PipelineError> {
    match checkpoint {
        Checkpoint::Cnn {
            variant,
            input_downsample,
            model,
        } => {
            let samples =
                build_training_samples(manifest, split, *variant, *input_downsample, cfg)?;
            let inputs: Vec<ModelInput> = samples.iter().map(|s| s.input.clone()).collect();
            let scores =
                crate::model::score_inputs(model, &inputs).map_err(PipelineError::Model)?;
            Ok(scores
                .into_iter()
                .zip(samples)
                .map(|(score, s)| ScoredSample::new(score, s.label))
                .collect())
        }
        Checkpoint::Logistic { model, .. } => {
            let pairs = collect_vcdr_pairs(manifest, split, cfg)?;
            Ok(pairs
                .into_iter()
                .map(|(vcdr, label)| ScoredSample::new(model.score(vcdr), label))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn test_config() -> RunConfig {
        RunConfig::default()
    }

    fn quiet_sample() -> (RgbImage, TriMask) {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            level_jitter: 0.0,
            vessel_count: (0, 0),
            ..SynthConfig::new(2, 99)
        };
        let samples = generate(&cfg).unwrap();
        let s = &samples[1];
        (s.image.clone(), s.mask.clone())
    }

    #[test]
    fn preprocess_produces_consistent_channels() {
        let (image, mask) = quiet_sample();
        let cfg = test_config();
        let prep = preprocess(&image, &mask, &cfg).unwrap();
        assert_eq!(prep.vessel.width(), ROI_SIZE);
        assert_eq!(prep.reduced.width(), ROI_SIZE);
        assert!(prep.cup_mean.is_some());
        assert!(prep.vcdr.value() > 0.0);
        // Noiseless, vessel-free sample: rim sits above threshold, so the
        // vessel map must be empty.
        assert!(prep.vessel.values().iter().all(|&v| v == 0));
    }

    #[test]
    fn preprocess_tolerates_empty_cup() {
        let (image, mut_mask) = quiet_sample();
        // Relabel cup pixels as rim.
        let labels: Vec<Region> = mut_mask
            .labels()
            .iter()
            .map(|&l| if l == Region::Cup { Region::Rim } else { l })
            .collect();
        let mask = TriMask::from_labels(mut_mask.width(), mut_mask.height(), labels);
        let cfg = test_config();
        let prep = preprocess(&image, &mask, &cfg).unwrap();
        assert_eq!(prep.cup_mean, None);
        assert_eq!(prep.vcdr.value(), 0.0);
        // Without the cup pair there are at most 4 milestones -> 5 palette
        // levels.
        assert!(prep.reduced.palette().len() <= 5);
    }

    #[test]
    fn variant_inputs_have_expected_channels() {
        let (image, mask) = quiet_sample();
        let cfg = test_config();
        let prep = preprocess(&image, &mask, &cfg).unwrap();
        assert_eq!(
            variant_input(&prep, Variant::Proposed, &cfg)
                .unwrap()
                .channels(),
            5
        );
        assert_eq!(
            variant_input(&prep, Variant::Fundus, &cfg)
                .unwrap()
                .channels(),
            3
        );
        assert_eq!(
            variant_input(&prep, Variant::Mask, &cfg)
                .unwrap()
                .channels(),
            3
        );
        assert!(variant_input(&prep, Variant::VcdrLogistic, &cfg).is_err());
    }

    #[test]
    fn mask_variant_planes_are_identical_renders() {
        let (image, mask) = quiet_sample();
        let cfg = test_config();
        let prep = preprocess(&image, &mask, &cfg).unwrap();
        let input = variant_input(&prep, Variant::Mask, &cfg).unwrap();
        assert_eq!(input.planes[0], input.planes[1]);
        assert_eq!(input.planes[1], input.planes[2]);
        // Exactly three distinct normalized levels can appear.
        let mut distinct: Vec<i32> = input.planes[0]
            .data()
            .iter()
            .map(|&v| (v * 1000.0).round() as i32)
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() <= 3);
    }
}
