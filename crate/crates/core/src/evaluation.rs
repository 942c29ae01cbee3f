//! Confusion matrix and the six evaluation metrics.
//!
//! Benign is the positive class: sensitivity reads "how many benign tumors
//! were recognized as benign". Callers preferring the opposite convention
//! can build the matrix with [`confusion_with_positive`].

use crate::classifiers::Label;
use crate::error::{Error, Result};

/// 2x2 outcome counts for a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_negative: u64,
    pub false_positive: u64,
    pub true_negative: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_negative + self.false_positive + self.true_negative
    }
}

/// Tallies predictions against truths with Benign as the positive class.
pub fn confusion(preds: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    confusion_with_positive(preds, truths, Label::Benign)
}

/// Tallies predictions against truths with a caller-chosen positive class.
pub fn confusion_with_positive(
    preds: &[Label],
    truths: &[Label],
    positive: Label,
) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix {
        true_positive: 0,
        false_negative: 0,
        false_positive: 0,
        true_negative: 0,
    };
    for (&p, &t) in preds.iter().zip(truths) {
        match (t == positive, p == positive) {
            (true, true) => cm.true_positive += 1,
            (true, false) => cm.false_negative += 1,
            (false, true) => cm.false_positive += 1,
            (false, false) => cm.true_negative += 1,
        }
    }
    Ok(cm)
}

/// The six summary metrics.
///
/// `degenerate` flags that at least one ratio had a zero denominator and
/// was reported as 0 instead of aborting the evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub youden_index: f64,
    pub precision: f64,
    pub f1_score: f64,
    pub degenerate: bool,
}

/// Evaluates the metric definitions in double precision.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio(cm.true_positive + cm.true_negative, total);
    let sensitivity = ratio(cm.true_positive, cm.true_positive + cm.false_negative);
    let specificity = ratio(cm.true_negative, cm.true_negative + cm.false_positive);
    let precision = ratio(cm.true_positive, cm.true_positive + cm.false_positive);
    let youden_index = sensitivity + specificity - 1.0;
    let f1_score = if precision + sensitivity == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * sensitivity / (precision + sensitivity)
    };
    Ok(MetricsReport {
        accuracy,
        sensitivity,
        specificity,
        youden_index,
        precision,
        f1_score,
        degenerate,
    })
}
