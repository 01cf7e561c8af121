//! Sliding windows over a timeline, with per-cell labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabelGrid;
use crate::tensor::Tensor;

/// Origin of a positive label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    /// Supplied with the data.
    Given,
    /// Point anomaly added with magnitude `alpha`.
    Injected { alpha: f64 },
    /// Correlation pattern reversed on this cell.
    Correlation,
}

/// Cell coordinate on the timeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub node: usize,
    pub modality: usize,
    pub t: usize,
}

/// Windows `N×M×W` starting at `0, L, 2L, …` over a labeled timeline.
/// Labels live on the timeline so overlapping windows always agree.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindowSet {
    pub timeline: Tensor,
    pub window: usize,
    pub step: usize,
    pub detect_tail: usize,
    pub labels: BTreeMap<Cell, Provenance>,
    /// Per-series extremes of the data before any injection, `node * M + m`.
    pub clean_min: Vec<f64>,
    pub clean_max: Vec<f64>,
}

/// Number of windows a timeline of length `t` yields.
pub fn window_count(t: usize, window: usize, step: usize) -> usize {
    if t < window || step == 0 {
        0
    } else {
        (t - window) / step + 1
    }
}

/// Windows of `timeline` (`N×M×T`) with no labels.
pub fn make_windows(timeline: &Tensor, window: usize, step: usize, detect_tail: usize) -> Result<LabeledWindowSet> {
    if timeline.ndim() != 3 {
        return Err(Error::dim("make_windows", timeline.shape(), &[0, 0, 0]));
    }
    if window == 0 || step == 0 || step > window || detect_tail == 0 || detect_tail > window {
        return Err(Error::Config(format!(
            "window {window}, step {step}, tail {detect_tail} are inconsistent"
        )));
    }
    let t = timeline.last_dim();
    if t < window {
        return Err(Error::Config(format!("timeline of {t} samples is shorter than window {window}")));
    }
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for s in timeline.data().chunks(t) {
        lo.push(s.iter().copied().fold(f64::INFINITY, f64::min));
        hi.push(s.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(LabeledWindowSet {
        timeline: timeline.clone(),
        window,
        step,
        detect_tail,
        labels: BTreeMap::new(),
        clean_min: lo,
        clean_max: hi,
    })
}

impl LabeledWindowSet {
    pub fn n_nodes(&self) -> usize {
        self.timeline.shape()[0]
    }

    pub fn n_modalities(&self) -> usize {
        self.timeline.shape()[1]
    }

    pub fn timeline_len(&self) -> usize {
        self.timeline.shape()[2]
    }

    pub fn len(&self) -> usize {
        window_count(self.timeline_len(), self.window, self.step)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self, i: usize) -> usize {
        i * self.step
    }

    /// Window `i` as `N×M×W`.
    pub fn window(&self, i: usize) -> Tensor {
        let (n, m, t) = (self.n_nodes(), self.n_modalities(), self.timeline_len());
        let s = self.start(i);
        let mut data = Vec::with_capacity(n * m * self.window);
        for series in self.timeline.data().chunks(t) {
            data.extend_from_slice(&series[s..s + self.window]);
        }
        Tensor::new(vec![n, m, self.window], data).expect("window shape")
    }

    pub fn windows(&self) -> Vec<Tensor> {
        (0..self.len()).map(|i| self.window(i)).collect()
    }

    /// Timeline range covered by the detection tail of window `i`.
    pub fn tail_range(&self, i: usize) -> std::ops::Range<usize> {
        let end = self.start(i) + self.window;
        end - self.detect_tail..end
    }

    /// Labels of window `i`'s detection tail, `N×M×detect_tail`.
    pub fn tail_labels(&self, i: usize) -> LabelGrid {
        let (n, m) = (self.n_nodes(), self.n_modalities());
        let range = self.tail_range(i);
        let mut g = LabelGrid::zeros(&[n, m, self.detect_tail]);
        for cell in self.labels.keys() {
            if range.contains(&cell.t) {
                let k = (cell.node * m + cell.modality) * self.detect_tail + (cell.t - range.start);
                g.labels[k] = 1;
            }
        }
        g
    }

    /// Timeline cells that fall inside at least one detection tail.
    pub fn tail_span(&self) -> std::ops::Range<usize> {
        if self.is_empty() {
            return 0..0;
        }
        self.tail_range(0).start..self.tail_range(self.len() - 1).end
    }

    /// Windows restricted to `range` of window indices, relabelled from 0.
    pub fn subset(&self, windows: std::ops::Range<usize>) -> Result<Self> {
        if windows.is_empty() || windows.end > self.len() {
            return Err(Error::Config(format!("window range {windows:?} outside 0..{}", self.len())));
        }
        let t0 = self.start(windows.start);
        let t1 = self.start(windows.end - 1) + self.window;
        let (n, m, t) = (self.n_nodes(), self.n_modalities(), self.timeline_len());
        let mut data = Vec::with_capacity(n * m * (t1 - t0));
        for s in self.timeline.data().chunks(t) {
            data.extend_from_slice(&s[t0..t1]);
        }
        let labels = self
            .labels
            .iter()
            .filter(|(c, _)| (t0..t1).contains(&c.t))
            .map(|(c, p)| (Cell { t: c.t - t0, ..*c }, *p))
            .collect();
        Ok(Self {
            timeline: Tensor::new(vec![n, m, t1 - t0], data)?,
            labels,
            ..self.clone()
        })
    }
}
