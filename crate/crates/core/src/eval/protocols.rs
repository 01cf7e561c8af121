use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_report, MetricsReport};
use crate::data::{inject_anomalies, LabeledWindowSet};
use crate::error::{Error, Result};
use crate::model::{classify, score_all, AnomalyScoreGrid, LabelGrid, ModelParams};

/// Scores, predictions and truth for every window of a set.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub scores: Vec<AnomalyScoreGrid>,
    pub predictions: Vec<LabelGrid>,
    pub truth: Vec<LabelGrid>,
}

impl Detection {
    /// Metrics over the windows in `which`.
    pub fn report_for(&self, which: &[usize]) -> Result<MetricsReport> {
        let mut s = Vec::new();
        let mut p = Vec::new();
        let mut t = Vec::new();
        for &i in which {
            s.extend_from_slice(self.scores[i].scores.data());
            p.extend_from_slice(&self.predictions[i].labels);
            t.extend_from_slice(&self.truth[i].labels);
        }
        metrics_report(&s, &p, &t)
    }

    pub fn report(&self) -> Result<MetricsReport> {
        self.report_for(&(0..self.scores.len()).collect::<Vec<_>>())
    }
}

/// Scores and classifies every window's detection tail with a calibrated model.
pub fn detect(params: &ModelParams, ws: &LabeledWindowSet) -> Result<Detection> {
    if params.threshold.is_none() {
        return Err(Error::Contract("detection needs a calibrated threshold".into()));
    }
    if ws.detect_tail != params.config.detect_tail || ws.window != params.config.window {
        return Err(Error::Config(format!(
            "window set (W={}, tail={}) does not match model (W={}, tail={})",
            ws.window, ws.detect_tail, params.config.window, params.config.detect_tail
        )));
    }
    let scores = score_all(&ws.windows(), params)?;
    let predictions = scores.iter().map(classify).collect::<Result<_>>()?;
    let truth = (0..ws.len()).map(|i| ws.tail_labels(i)).collect();
    Ok(Detection {
        scores,
        predictions,
        truth,
    })
}

/// Mean, sample variance and sample standard deviation of one metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub var: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    Summary {
        mean,
        var,
        std: var.sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub trials: Vec<MetricsReport>,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    /// Over the trials where AUC was defined.
    pub auc: Summary,
}

/// Splits the windows into `segments` contiguous groups and, `trials`
/// times, evaluates on `pick` randomly chosen groups.
pub fn reliability_resample(
    det: &Detection,
    segments: usize,
    pick: usize,
    trials: usize,
    seed: u64,
) -> Result<ReliabilityReport> {
    let n = det.scores.len();
    if pick == 0 || pick > segments || segments > n || trials == 0 {
        return Err(Error::Config(format!(
            "need 1 <= pick ({pick}) <= segments ({segments}) <= windows ({n}) and trials >= 1"
        )));
    }
    let bounds: Vec<usize> = (0..=segments).map(|s| s * n / segments).collect();
    let mut reports = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut chosen = sample(&mut rng, segments, pick).into_vec();
        chosen.sort_unstable();
        let windows: Vec<usize> = chosen.iter().flat_map(|&s| bounds[s]..bounds[s + 1]).collect();
        reports.push(det.report_for(&windows)?);
    }
    let col = |f: fn(&MetricsReport) -> Option<f64>| summarize(&reports.iter().filter_map(f).collect::<Vec<_>>());
    Ok(ReliabilityReport {
        precision: col(|r| Some(r.precision)),
        recall: col(|r| Some(r.recall)),
        f1: col(|r| Some(r.f1)),
        auc: col(|r| r.auc),
        trials: reports,
    })
}

/// The magnitudes swept by default.
pub const DEFAULT_ALPHAS: [f64; 6] = [-1.0, -0.5, -0.1, 0.1, 0.5, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub report: MetricsReport,
}

/// Injects point anomalies at each magnitude into the same clean windows
/// and evaluates the model on each.
pub fn robustness_sweep(
    params: &ModelParams,
    clean: &LabeledWindowSet,
    alphas: &[f64],
    rate: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::Config("robustness sweep needs at least one alpha".into()));
    }
    if let Some(a) = alphas.iter().find(|a| **a == 0.0) {
        return Err(Error::Config(format!("alpha {a} is not an anomaly magnitude")));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let ws = inject_anomalies(clean, alpha, rate, seed)?;
            let report = detect(params, &ws)?.report()?;
            log::info!("alpha {alpha}: f1 {:.3} recall {:.3}", report.f1, report.recall);
            Ok(SweepRow { alpha, report })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["alpha", "precision", "recall", "f1", "auc", "tp", "fp", "fn", "tn"])
        .map_err(fmt)?;
    for r in rows {
        let m = &r.report;
        w.write_record([
            r.alpha.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.auc.map_or_else(String::new, |a| a.to_string()),
            m.counts.tp.to_string(),
            m.counts.fp.to_string(),
            m.counts.fn_.to_string(),
            m.counts.tn.to_string(),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn detection(windows: usize) -> Detection {
        let mut d = Detection {
            scores: vec![],
            predictions: vec![],
            truth: vec![],
        };
        for i in 0..windows {
            let s = vec![0.1 * i as f64, 1.0, 0.2, 0.0];
            d.scores.push(AnomalyScoreGrid {
                scores: Tensor::new(vec![1, 1, 4], s).unwrap(),
                threshold: Some(0.5),
            });
            d.predictions.push(LabelGrid::new(vec![1, 1, 4], vec![0, 1, 0, 0]).unwrap());
            d.truth.push(LabelGrid::new(vec![1, 1, 4], vec![0, 1, u8::from(i % 2 == 0), 0]).unwrap());
        }
        d
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[0.7]);
        assert_eq!((s.mean, s.var, s.std), (0.7, 0.0, 0.0));
        let s = summarize(&[0.5; 4]);
        assert_eq!(s.std, 0.0);
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.var - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn resampling_is_seeded_and_checked() {
        let d = detection(18);
        let a = reliability_resample(&d, 9, 7, 10, 3).unwrap();
        assert_eq!(a, reliability_resample(&d, 9, 7, 10, 3).unwrap());
        assert_eq!(a.trials.len(), 10);
        let one = reliability_resample(&d, 9, 7, 1, 3).unwrap();
        assert_eq!(one.f1.mean, one.trials[0].f1);
        assert_eq!(one.f1.var, 0.0);
        // every window has the same prediction pattern, so precision never varies
        assert_eq!(a.precision.std, 0.0);
        assert!(reliability_resample(&d, 9, 10, 1, 3).is_err());
        assert!(reliability_resample(&d, 30, 7, 1, 3).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let d = detection(2);
        let rows = vec![SweepRow {
            alpha: -0.5,
            report: d.report().unwrap(),
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,precision,recall,f1,auc,tp,fp,fn,tn\n-0.5,1,"));
    }
}
