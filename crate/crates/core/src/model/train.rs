//! SGD training loop with per-epoch validation AUC tracking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cnn::{glaucoma_probability, CnnModel};
use super::ModelError;
use crate::channels::{augment, AugmentConfig, ModelInput};
use crate::metrics::{roc_auc, ScoredSample};
use crate::Label;

#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: ModelInput,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameter snapshot with the best validation AUC.
    pub model: CnnModel,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
}

fn mix_seed(seed: u64, epoch: u64, index: u64) -> u64 {
    let mut z =
        seed ^ epoch.wrapping_mul(0x9e3779b97f4a7c15) ^ index.wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Glaucoma probabilities for a set of inputs, in order.
pub fn score_inputs(model: &CnnModel, inputs: &[ModelInput]) -> Result<Vec<f64>, ModelError> {
    inputs
        .par_iter()
        .map(|input| model.forward(input).map(|l| glaucoma_probability(&l)))
        .collect()
}

fn validation_auc(model: &CnnModel, val: &[TrainSample]) -> Result<f64, ModelError> {
    let inputs: Vec<ModelInput> = val.iter().map(|s| s.input.clone()).collect();
    let scores = score_inputs(model, &inputs)?;
    let samples: Vec<ScoredSample> = scores
        .iter()
        .zip(val)
        .map(|(&score, s)| ScoredSample::new(score, s.label))
        .collect();
    let (_, auc) = roc_auc(&samples)?;
    Ok(auc)
}

/// Train by mini-batch SGD with momentum and return the snapshot with the
/// highest validation AUC. Bitwise deterministic for a given seed: shuffling
/// and per-sample augmentation derive from fixed-order RNG streams and batch
/// gradients reduce sequentially.
pub fn train(
    mut model: CnnModel,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptySplit("val"));
    }

    let mut best_model = model.clone();
    let mut best_val_auc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut velocity = vec![0.0f64; model.parameter_count()];
    let batch_size = cfg.batch_size.max(1);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64, u64::MAX));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(batch_size) {
            let inputs: Vec<ModelInput> = batch
                .par_iter()
                .map(|&idx| {
                    if cfg.augment.is_noop() {
                        train_set[idx].input.clone()
                    } else {
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64, idx as u64));
                        augment(&train_set[idx].input, &mut rng, &cfg.augment)
                    }
                })
                .collect();
            let labels: Vec<Label> = batch.iter().map(|&idx| train_set[idx].label).collect();
            let (batch_loss, grads) = model.batch_gradients(&inputs, &labels)?;
            if !batch_loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            loss_sum += batch_loss * batch.len() as f64;

            if cfg.learning_rate != 0.0 {
                let mut params = model.parameters();
                for ((param, v), g) in params.iter_mut().zip(&mut velocity).zip(&grads) {
                    *v = cfg.momentum * *v + g;
                    *param -= cfg.learning_rate * *v;
                }
                model.set_parameters(&params);
            }
        }

        let train_loss = loss_sum / train_set.len() as f64;
        let val_auc = validation_auc(&model, val_set)?;
        log.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        if val_auc > best_val_auc {
            best_val_auc = val_auc;
            best_epoch = epoch;
            best_model = model.clone();
        }
    }

    if log.is_empty() {
        // Zero-epoch run: the initialization is the best snapshot.
        best_val_auc = validation_auc(&model, val_set)?;
        best_epoch = 0;
        best_model = model;
    }

    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch,
        best_val_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BackboneConfig;
    use crate::plane::Plane;

    fn toy_sample(label: Label, seed: u64) -> TrainSample {
        // Positive samples carry a bright center blob; negatives are dim.
        let bright = if label == Label::Glaucoma { 1.0 } else { 0.2 };
        let planes = (0..3)
            .map(|c| {
                Plane::from_fn(8, 8, |x, y| {
                    let dx = x as f32 - 3.5;
                    let dy = y as f32 - 3.5;
                    let blob = if dx * dx + dy * dy < 6.0 { bright } else { 0.0 };
                    let h = (seed ^ ((c as u64) << 32) ^ ((x as u64) << 16) ^ y as u64)
                        .wrapping_mul(0x9e3779b97f4a7c15);
                    blob + ((h >> 40) % 100) as f32 / 1000.0
                })
            })
            .collect();
        TrainSample {
            input: ModelInput::new(planes, if label == Label::Glaucoma { 0.8 } else { 0.3 }),
            label,
        }
    }

    fn toy_dataset(n: usize, offset: u64) -> Vec<TrainSample> {
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Normal
                } else {
                    Label::Glaucoma
                };
                toy_sample(label, offset + i as u64)
            })
            .collect()
    }

    fn toy_model(seed: u64) -> CnnModel {
        CnnModel::new(BackboneConfig::new(3, vec![4]), false, seed).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let train_set = toy_dataset(8, 0);
        let val_set = toy_dataset(4, 100);
        let model = toy_model(1);
        let before = model.parameters();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            augment: AugmentConfig::disabled(),
            ..TrainConfig::default()
        };
        let outcome = train(model, &train_set, &val_set, &cfg).unwrap();
        assert_eq!(outcome.model.parameters(), before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let train_set = toy_dataset(16, 0);
        let val_set = toy_dataset(6, 50);
        let cfg = TrainConfig {
            epochs: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(toy_model(9), &train_set, &val_set, &cfg).unwrap();
        let b = train(toy_model(9), &train_set, &val_set, &cfg).unwrap();
        let bytes = |m: &CnnModel| -> Vec<u8> {
            m.parameters()
                .iter()
                .flat_map(|p| p.to_le_bytes())
                .collect()
        };
        assert_eq!(bytes(&a.model), bytes(&b.model));
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn training_separates_toy_classes() {
        let train_set = toy_dataset(40, 0);
        let val_set = toy_dataset(12, 500);
        let cfg = TrainConfig {
            epochs: 12,
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 8,
            seed: 4,
            augment: AugmentConfig::disabled(),
        };
        let outcome = train(toy_model(4), &train_set, &val_set, &cfg).unwrap();
        assert!(
            outcome.best_val_auc > 0.9,
            "best val AUC {} too low",
            outcome.best_val_auc
        );
        assert_eq!(outcome.log.len(), 12);
    }

    #[test]
    fn empty_splits_are_rejected() {
        let cfg = TrainConfig::default();
        let data = toy_dataset(4, 0);
        assert_eq!(
            train(toy_model(0), &[], &data, &cfg).unwrap_err(),
            ModelError::EmptySplit("train")
        );
        assert_eq!(
            train(toy_model(0), &data, &[], &cfg).unwrap_err(),
            ModelError::EmptySplit("val")
        );
    }

    #[test]
    fn single_class_validation_is_rejected() {
        let train_set = toy_dataset(4, 0);
        let val_set: Vec<TrainSample> = (0..3).map(|i| toy_sample(Label::Normal, i)).collect();
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert_eq!(
            train(toy_model(0), &train_set, &val_set, &cfg).unwrap_err(),
            ModelError::SingleClassData
        );
    }
}
