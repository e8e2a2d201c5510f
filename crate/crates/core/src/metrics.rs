//! Confusion matrices and the accuracy / precision / recall / F1 /
//! specificity family, with fold averaging.
//!
//! Label 1 (COVID) is the positive class. A ratio whose denominator is zero
//! is reported as `None` and skipped when averaging over folds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// Row = truth (non-COVID, COVID), column = prediction; entry (1,1) is TN
    /// and (2,2) is TP.
    pub fn as_grid(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

pub fn confusion(predictions: &[u8], truths: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "labels must be 0 or 1, got prediction {p} / truth {t}"
                )))
            }
        }
    }
    Ok(cm)
}

/// Which formula fills the inverse-recall column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseRecall {
    /// TN / (TN + FP).
    #[default]
    Specificity,
    /// TP / (TP + FN), identical to recall; kept for tables that use this definition.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub inverse_recall: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsRow> {
    compute_metrics_with(cm, InverseRecall::Specificity)
}

pub fn compute_metrics_with(cm: &ConfusionMatrix, inverse: InverseRecall) -> Result<MetricsRow> {
    if cm.total() == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * (r * p) / (r + p)),
        _ => None,
    };
    let inverse_recall = match inverse {
        InverseRecall::Specificity => ratio(cm.tn, cm.tn + cm.fp),
        InverseRecall::AsPrinted => recall,
    };
    Ok(MetricsRow {
        accuracy: ratio(cm.tn + cm.tp, cm.total()),
        precision,
        recall,
        f1,
        inverse_recall,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-metric arithmetic mean over the rows where that metric is defined.
pub fn fold_average(rows: &[MetricsRow]) -> Result<MetricsRow> {
    if rows.is_empty() {
        return Err(Error::Empty("metrics rows"));
    }
    Ok(MetricsRow {
        accuracy: mean_defined(rows.iter().map(|r| r.accuracy)),
        precision: mean_defined(rows.iter().map(|r| r.precision)),
        recall: mean_defined(rows.iter().map(|r| r.recall)),
        f1: mean_defined(rows.iter().map(|r| r.f1)),
        inverse_recall: mean_defined(rows.iter().map(|r| r.inverse_recall)),
    })
}

/// Entry-wise mean of confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanConfusion {
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tp: f64,
}

pub fn average_confusion(cms: &[ConfusionMatrix]) -> Result<MeanConfusion> {
    if cms.is_empty() {
        return Err(Error::Empty("confusion matrix list"));
    }
    let n = cms.len() as f64;
    let sum = |f: fn(&ConfusionMatrix) -> u64| cms.iter().map(f).sum::<u64>() as f64 / n;
    Ok(MeanConfusion {
        tn: sum(|c| c.tn),
        fp: sum(|c| c.fp),
        fn_: sum(|c| c.fn_),
        tp: sum(|c| c.tp),
    })
}
