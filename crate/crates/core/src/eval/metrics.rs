use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnomalyScoreGrid, LabelGrid};

/// Cellwise confusion counts; anomalies are the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion(pred: &LabelGrid, truth: &LabelGrid) -> Result<ConfusionCounts> {
    if pred.shape != truth.shape {
        return Err(Error::dim("confusion", &pred.shape, &truth.shape));
    }
    Ok(confusion_slices(&pred.labels, &truth.labels))
}

pub(crate) fn confusion_slices(pred: &[u8], truth: &[u8]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Precision, recall and F1, with flags for zero denominators (reported as 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

/// F1 from precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> (f64, bool) {
    ratio(2.0 * precision * recall, precision + recall)
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> PrecisionRecall {
    let (precision, precision_degenerate) = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let (recall, recall_degenerate) = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let (f1, f1_degenerate) = f1_score(precision, recall);
    PrecisionRecall {
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
        f1_degenerate,
    }
}

/// Trapezoidal area under the ROC curve swept over distinct score values.
/// Tied scores move FPR and TPR together, which credits each tied
/// positive/negative pair with one half.
pub fn auc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::dim("auc", &[scores.len()], &[truth.len()]));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Contract("auc received NaN scores".into()));
    }
    let pos = truth.iter().filter(|&&t| t != 0).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({pos} positive, {neg} negative cells)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // Each trapezoid is (Δfp/neg)·(tp_prev + tp)/(2·pos); summing the
    // integer numerators keeps the area exact until the final division.
    let (mut tp, mut fp, mut twice_area) = (0u128, 0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp_prev) * (tp + tp_prev);
    }
    Ok(twice_area as f64 / (2 * pos * neg) as f64)
}

pub fn auc_grid(scores: &AnomalyScoreGrid, truth: &LabelGrid) -> Result<f64> {
    if scores.scores.shape() != truth.shape.as_slice() {
        return Err(Error::dim("auc", scores.scores.shape(), &truth.shape));
    }
    auc(scores.scores.data(), &truth.labels)
}

/// One evaluation's headline numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the truth holds a single class.
    pub auc: Option<f64>,
    pub counts: ConfusionCounts,
    /// Names of metrics whose denominators were zero.
    pub degenerate: Vec<String>,
}

/// Metrics from flat, aligned score, prediction and truth vectors.
pub fn metrics_report(scores: &[f64], pred: &[u8], truth: &[u8]) -> Result<MetricsReport> {
    if pred.len() != truth.len() || scores.len() != truth.len() {
        return Err(Error::dim("metrics", &[scores.len(), pred.len()], &[truth.len()]));
    }
    let counts = confusion_slices(pred, truth);
    let pr = precision_recall_f1(&counts);
    let mut degenerate = Vec::new();
    for (flag, name) in [
        (pr.precision_degenerate, "precision"),
        (pr.recall_degenerate, "recall"),
        (pr.f1_degenerate, "f1"),
    ] {
        if flag {
            degenerate.push(name.to_string());
        }
    }
    let auc = match auc(scores, truth) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => {
            degenerate.push("auc".into());
            None
        }
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        precision: pr.precision,
        recall: pr.recall,
        f1: pr.f1,
        auc,
        counts,
        degenerate,
    })
}
