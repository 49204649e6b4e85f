//! Glaucoma screening from disc-centered fundus ROIs and optic disc/cup
//! segmentation masks.
//!
//! The pipeline turns a trimap segmentation mask (background / rim / cup) into
//! complementary model inputs instead of treating segmentation as a standalone
//! upstream task:
//!
//! 1. **Mask geometry** – parse trimaps and compute the vertical cup-to-disc
//!    ratio (VCDR) from row extents ([`mask`]).
//! 2. **Region statistics** – green-channel means of background, rim and cup,
//!    plus the adaptive vessel threshold derived from them ([`stats`]).
//! 3. **Channel synthesis** – a rough binary vessel map, a milestone-quantized
//!    low-complexity channel, and the assembled 5-channel tensor with the VCDR
//!    scalar attached ([`channels`]).
//! 4. **Model** – a small convolutional backbone whose pooled features are
//!    concatenated with a VCDR-scaled copy before the classifier, trained by
//!    SGD with analytic gradients, plus a VCDR-only logistic baseline
//!    ([`model`]).
//! 5. **Evaluation** – ROC/AUC, sensitivity/specificity, harmonic F1 and the
//!    constrained validation threshold rule ([`metrics`]).
//!
//! [`synth`] generates elliptical phantom datasets with exact ground truth so
//! the whole chain is verifiable end to end without clinical data; the
//! `fundusfuse` binary exposes everything as `synth` / `prep` / `train` /
//! `eval` / `roc` subcommands.

pub mod channels;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod plane;
pub mod stats;
pub mod synth;

/// Binary diagnosis label carried by manifests, scored samples and training
/// batches. Glaucoma is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Glaucoma,
}

impl Label {
    /// Index of the class logit / softmax component for this label.
    pub fn class_index(self) -> usize {
        match self {
            Label::Normal => 0,
            Label::Glaucoma => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Glaucoma)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Normal => write!(f, "normal"),
            Label::Glaucoma => write!(f, "glaucoma"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Label::Normal),
            "glaucoma" => Ok(Label::Glaucoma),
            _ => Err(()),
        }
    }
}
