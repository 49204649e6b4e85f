//! Classification metrics: confusion counts, sensitivity/specificity, the
//! harmonic F1, ROC/AUC, and the constrained validation threshold rule.

use thiserror::Error;

use crate::Label;

/// A glaucoma probability paired with its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub label: Label,
}

impl ScoredSample {
    pub fn new(score: f64, label: Label) -> Self {
        Self { score, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub false_pos: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.true_neg + self.false_pos
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no positive samples (TP + FN = 0)")]
    NoPositives,
    #[error("no negative samples (TN + FP = 0)")]
    NoNegatives,
    #[error("both classes must be present")]
    SingleClassData,
}

/// Operating-point metrics plus the full ROC curve for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    /// `(false positive rate, true positive rate)` pairs from (0,0) to (1,1).
    pub roc_points: Vec<(f64, f64)>,
}

/// Threshold the scores: predicted positive iff `score >= threshold`.
pub fn confusion(samples: &[ScoredSample], threshold: f64) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for s in samples {
        let predicted_positive = s.score >= threshold;
        match (s.label.is_positive(), predicted_positive) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_neg += 1,
            (false, false) => counts.true_neg += 1,
            (false, true) => counts.false_pos += 1,
        }
    }
    counts
}

/// Sensitivity `TP/(TP+FN)` and specificity `TN/(TN+FP)`.
pub fn sens_spec(counts: &ConfusionCounts) -> Result<(f64, f64), MetricsError> {
    let positives = counts.true_pos + counts.false_neg;
    let negatives = counts.true_neg + counts.false_pos;
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    if negatives == 0 {
        return Err(MetricsError::NoNegatives);
    }
    Ok((
        counts.true_pos as f64 / positives as f64,
        counts.true_neg as f64 / negatives as f64,
    ))
}

/// Harmonic mean of sensitivity and specificity; zero when both are zero.
pub fn f1_harmonic(sensitivity: f64, specificity: f64) -> f64 {
    let denom = sensitivity + specificity;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * sensitivity * specificity / denom
    }
}

/// ROC curve over every distinct score threshold, plus the trapezoidal AUC.
///
/// Tied scores collapse into a single ROC step, which grants each tied
/// positive/negative pair half credit and makes the area equal to the
/// Mann–Whitney statistic.
pub fn roc_auc(samples: &[ScoredSample]) -> Result<(Vec<(f64, f64)>, f64), MetricsError> {
    let positives = samples.iter().filter(|s| s.label.is_positive()).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClassData);
    }

    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    while i < sorted.len() {
        let score = sorted[i].score;
        while i < sorted.len() && sorted[i].score == score {
            if sorted[i].label.is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }

    let mut auc = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok((points, auc))
}

fn threshold_candidates(samples: &[ScoredSample]) -> Vec<f64> {
    let mut scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scores.dedup();
    let mut candidates = vec![0.0];
    for pair in scores.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(1.0);
    candidates
}

/// Pick the operating threshold on a validation set: maximize the harmonic F1
/// subject to specificity strictly greater than 0.8.
///
/// Candidates are all midpoints between adjacent distinct scores plus 0
/// and 1. When no candidate satisfies the constraint, fall back to the
/// candidate with maximal specificity, tie-broken by higher F1, then by
/// lower threshold. Ties on the primary objective also resolve to the
/// lower threshold.
pub fn select_threshold(validation: &[ScoredSample]) -> Result<f64, MetricsError> {
    let positives = validation.iter().filter(|s| s.label.is_positive()).count();
    if positives == 0 || positives == validation.len() {
        return Err(MetricsError::SingleClassData);
    }

    let mut best_feasible: Option<(f64, f64)> = None; // (f1, threshold)
    let mut best_fallback: Option<(f64, f64, f64)> = None; // (spec, f1, threshold)
    for threshold in threshold_candidates(validation) {
        let counts = confusion(validation, threshold);
        let (sens, spec) = sens_spec(&counts)?;
        let f1 = f1_harmonic(sens, spec);
        if spec > 0.8 {
            let better = match best_feasible {
                None => true,
                Some((best_f1, _)) => f1 > best_f1,
            };
            if better {
                best_feasible = Some((f1, threshold));
            }
        }
        let better_fallback = match best_fallback {
            None => true,
            Some((best_spec, best_f1, _)) => {
                spec > best_spec || (spec == best_spec && f1 > best_f1)
            }
        };
        if better_fallback {
            best_fallback = Some((spec, f1, threshold));
        }
    }

    Ok(match (best_feasible, best_fallback) {
        (Some((_, threshold)), _) => threshold,
        (None, Some((_, _, threshold))) => threshold,
        (None, None) => unreachable!("candidate list is never empty"),
    })
}

/// Full operating-point report for a sample set at a fixed threshold.
pub fn evaluate(samples: &[ScoredSample], threshold: f64) -> Result<EvalReport, MetricsError> {
    let counts = confusion(samples, threshold);
    let (sensitivity, specificity) = sens_spec(&counts)?;
    let f1 = f1_harmonic(sensitivity, specificity);
    let (roc_points, auc) = roc_auc(samples)?;
    Ok(EvalReport {
        auc,
        threshold,
        sensitivity,
        specificity,
        f1,
        counts,
        roc_points,
    })
}

/// Brute-force Mann–Whitney AUC: fraction of correctly ordered
/// positive/negative pairs with half credit for ties. Quadratic; used as the
/// independent oracle for [`roc_auc`].
pub fn pairwise_auc(samples: &[ScoredSample]) -> Result<f64, MetricsError> {
    let positives: Vec<f64> = samples
        .iter()
        .filter(|s| s.label.is_positive())
        .map(|s| s.score)
        .collect();
    let negatives: Vec<f64> = samples
        .iter()
        .filter(|s| !s.label.is_positive())
        .map(|s| s.score)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(MetricsError::SingleClassData);
    }
    let mut credit = 0.0f64;
    for &p in &positives {
        for &n in &negatives {
            if p > n {
                credit += 1.0;
            } else if p == n {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (positives.len() as f64 * negatives.len() as f64))
}
