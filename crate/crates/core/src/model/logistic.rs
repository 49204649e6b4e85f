//! VCDR-only logistic regression baseline.

use super::ModelError;
use crate::Label;

/// `P(glaucoma) = sigmoid(slope * vcdr + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticVcdr {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticVcdr {
    pub fn score(&self, vcdr: f64) -> f64 {
        sigmoid(self.slope * vcdr + self.intercept)
    }
}

/// Fit by full-batch gradient ascent on the mean log-likelihood, starting
/// from zero parameters. Deterministic; requires both classes.
pub fn fit_logistic_vcdr(
    pairs: &[(f64, Label)],
    cfg: &LogisticConfig,
) -> Result<LogisticVcdr, ModelError> {
    let positives = pairs.iter().filter(|(_, l)| l.is_positive()).count();
    if positives == 0 || positives == pairs.len() {
        return Err(ModelError::SingleClassData);
    }
    let n = pairs.len() as f64;
    let mut model = LogisticVcdr {
        slope: 0.0,
        intercept: 0.0,
    };
    for _ in 0..cfg.iterations {
        let mut grad_slope = 0.0;
        let mut grad_intercept = 0.0;
        for &(vcdr, label) in pairs {
            let target = if label.is_positive() { 1.0 } else { 0.0 };
            let residual = target - model.score(vcdr);
            grad_slope += residual * vcdr;
            grad_intercept += residual;
        }
        model.slope += cfg.learning_rate * grad_slope / n;
        model.intercept += cfg.learning_rate * grad_intercept / n;
    }
    Ok(model)
}
