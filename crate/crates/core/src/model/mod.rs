//! Classifier models: a small convolutional backbone with the VCDR fusion
//! head, and the VCDR-only logistic regression baseline.
//!
//! The fusion mechanism is the interesting part: the pooled feature vector is
//! concatenated with a copy of itself multiplied by the VCDR scalar, doubling
//! the width seen by the final linear layer. The scalar is treated as a
//! constant during backpropagation — it is measured from the mask, not
//! learned.

mod checkpoint;
mod cnn;
mod logistic;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use cnn::{fuse, glaucoma_probability, softmax, BackboneConfig, CnnModel};
pub use logistic::{fit_logistic_vcdr, LogisticConfig, LogisticVcdr};
pub use train::{score_inputs, train, EpochRecord, TrainConfig, TrainOutcome, TrainSample};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("input has {got} channels, model expects {expected}")]
    ChannelCountMismatch { expected: usize, got: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input {got_w}x{got_h} too small for {blocks} halving blocks")]
    InputTooSmall {
        got_w: u32,
        got_h: u32,
        blocks: usize,
    },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("both classes must be present")]
    SingleClassData,
    #[error("non-finite loss at epoch {epoch} (diverged)")]
    NonFiniteLoss { epoch: usize },
}

impl From<crate::metrics::MetricsError> for ModelError {
    fn from(_: crate::metrics::MetricsError) -> Self {
        ModelError::SingleClassData
    }
}
