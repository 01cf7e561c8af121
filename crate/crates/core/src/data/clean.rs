//! Cleaning, alignment and normalization of raw mote logs.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use super::ibrl::{RawReading, RawReadingLog};
use crate::error::{Error, Result};
use crate::graph::NodePosition;
use crate::tensor::Tensor;

/// Modalities kept from the lab logs, in tensor order.
pub const IBRL_MODALITIES: [&str; 3] = ["humidity", "temperature", "voltage"];

/// Standard deviations below this are treated as zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Knobs of [`clean_and_align`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningOptions {
    pub excluded_nodes: Vec<u32>,
    /// Inclusive range of valid mote ids.
    pub node_range: (u32, u32),
    pub period_seconds: f64,
    /// Longest run of missing samples filled by interpolation.
    pub max_gap: usize,
    /// Nodes missing more than this share of the grid are dropped.
    pub max_missing_fraction: f64,
    pub max_temperature: f64,
    pub min_humidity: f64,
}

impl Default for CleaningOptions {
    fn default() -> Self {
        Self {
            excluded_nodes: vec![5, 15],
            node_range: (1, 54),
            period_seconds: 31.0,
            max_gap: 10,
            max_missing_fraction: 0.5,
            max_temperature: 120.0,
            min_humidity: 0.0,
        }
    }
}

/// Row and cell counts of one cleaning run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningCounts {
    pub rows_in: usize,
    pub malformed_rows: usize,
    pub dropped_excluded_node: usize,
    pub dropped_unknown_node: usize,
    pub dropped_out_of_range: usize,
    pub dropped_incomplete: usize,
    pub interpolated_cells: usize,
    pub grid_length: usize,
    pub kept_length: usize,
}

impl CleaningCounts {
    pub fn dropped_rows(&self) -> usize {
        self.dropped_excluded_node + self.dropped_unknown_node + self.dropped_out_of_range + self.dropped_incomplete
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub node_id: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesId {
    pub node_id: u32,
    pub modality: String,
}

fn empty_values() -> Tensor {
    Tensor::zeros(&[0, 0, 0])
}

/// Aligned, z-scored tensor `N×M×T` with the statistics needed to undo the
/// normalization. Everything except `values` forms the archive sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanDataset {
    #[serde(skip, default = "empty_values")]
    pub values: Tensor,
    pub node_ids: Vec<u32>,
    pub modalities: Vec<String>,
    /// Per-series mean, indexed `node * M + modality`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Series whose standard deviation fell below [`SIGMA_FLOOR`].
    pub degenerate: Vec<SeriesId>,
    pub exclusions: Vec<Exclusion>,
    pub counts: CleaningCounts,
    pub start_time: Option<NaiveDateTime>,
    pub period_seconds: f64,
    pub positions: Option<Vec<NodePosition>>,
}

impl CleanDataset {
    /// Normalizes raw aligned values into a dataset.
    pub fn from_raw(raw: &Tensor, node_ids: Vec<u32>, modalities: Vec<String>) -> Result<Self> {
        if raw.ndim() != 3 || raw.shape()[0] != node_ids.len() || raw.shape()[1] != modalities.len() {
            return Err(Error::dim("dataset", raw.shape(), &[node_ids.len(), modalities.len(), 0]));
        }
        let (values, mean, std) = zscore(raw)?;
        let m = modalities.len();
        let degenerate = std
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < SIGMA_FLOOR)
            .map(|(i, _)| SeriesId {
                node_id: node_ids[i / m],
                modality: modalities[i % m].clone(),
            })
            .collect();
        Ok(Self {
            values,
            node_ids,
            modalities,
            mean,
            std,
            degenerate,
            exclusions: Vec::new(),
            counts: CleaningCounts::default(),
            start_time: None,
            period_seconds: 31.0,
            positions: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn len(&self) -> usize {
        self.values.shape().get(2).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values in original units.
    pub fn denormalized(&self) -> Tensor {
        let t = self.len();
        let mut out = self.values.clone();
        for (i, series) in out.data_mut().chunks_mut(t.max(1)).enumerate() {
            let (mu, sigma) = (self.mean[i], self.std[i]);
            let sigma = if sigma < SIGMA_FLOOR { 0.0 } else { sigma };
            series.iter_mut().for_each(|v| *v = *v * sigma + mu);
        }
        out
    }

    /// The dataset as a raw log on its sampling grid; only meaningful for the
    /// lab modalities.
    pub fn to_log(&self) -> Result<RawReadingLog> {
        let idx = |name: &str| self.modalities.iter().position(|m| m == name);
        let (h, tm, v) = match (idx("humidity"), idx("temperature"), idx("voltage")) {
            (Some(h), Some(t), Some(v)) => (h, t, v),
            _ => return Err(Error::Contract("log export needs humidity, temperature and voltage".into())),
        };
        let start = self
            .start_time
            .ok_or_else(|| Error::Contract("dataset has no start time".into()))?;
        let raw = self.denormalized();
        let step = TimeDelta::milliseconds((self.period_seconds * 1000.0).round() as i64);
        let mut rows = Vec::with_capacity(self.n_nodes() * self.len());
        for t in 0..self.len() {
            let ts = start + step * t as i32;
            for (n, &id) in self.node_ids.iter().enumerate() {
                rows.push(RawReading {
                    timestamp: ts,
                    epoch: t as i64,
                    node_id: id,
                    temperature: Some(raw.at3(n, tm, t)),
                    humidity: Some(raw.at3(n, h, t)),
                    light: None,
                    voltage: Some(raw.at3(n, v, t)),
                });
            }
        }
        Ok(RawReadingLog {
            rows,
            skipped_lines: Vec::new(),
        })
    }
}

/// Per-series z-score along the last axis; returns values, means and
/// population standard deviations. Degenerate series map to zeros.
pub fn zscore(x: &Tensor) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let t = x.last_dim();
    if t == 0 {
        return Err(Error::Contract("cannot normalize empty series".into()));
    }
    let mut out = x.clone();
    let (mut means, mut stds) = (Vec::new(), Vec::new());
    for series in out.data_mut().chunks_mut(t) {
        let mu = series.iter().sum::<f64>() / t as f64;
        let var = series.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / t as f64;
        let sigma = var.sqrt();
        if sigma < SIGMA_FLOOR {
            series.iter_mut().for_each(|v| *v = 0.0);
        } else {
            series.iter_mut().for_each(|v| *v = (*v - mu) / sigma);
        }
        means.push(mu);
        stds.push(sigma);
    }
    Ok((out, means, stds))
}

/// Linear interpolation across interior gaps of at most `max_gap` samples.
/// Returns the number of filled cells.
pub fn fill_gaps(series: &mut [Option<f64>], max_gap: usize) -> usize {
    let mut filled = 0;
    let mut last: Option<usize> = None;
    for i in 0..series.len() {
        if series[i].is_none() {
            continue;
        }
        if let Some(p) = last {
            let gap = i - p - 1;
            if gap > 0 && gap <= max_gap {
                let (a, b) = (series[p].unwrap_or(0.0), series[i].unwrap_or(0.0));
                for k in 1..=gap {
                    let w = k as f64 / (gap + 1) as f64;
                    series[p + k] = Some(a + (b - a) * w);
                }
                filled += gap;
            }
        }
        last = Some(i);
    }
    filled
}

/// Maximal runs `(start, len)` where `ok` holds.
fn runs(ok: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in ok.iter().chain(std::iter::once(&false)).enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Applies node and range filters, resamples onto a uniform grid, fills
/// short gaps, drops sparse nodes, keeps the longest fully observed stretch
/// and z-scores every series.
pub fn clean_and_align(log: &RawReadingLog, opts: &CleaningOptions) -> Result<CleanDataset> {
    if log.rows.is_empty() {
        return Err(Error::Contract("cannot clean an empty log".into()));
    }
    if !(opts.period_seconds > 0.0) || !(0.0..=1.0).contains(&opts.max_missing_fraction) {
        return Err(Error::Config(format!("invalid cleaning options {opts:?}")));
    }
    let mut counts = CleaningCounts {
        rows_in: log.rows.len(),
        malformed_rows: log.skipped(),
        ..Default::default()
    };
    let excluded: BTreeSet<u32> = opts.excluded_nodes.iter().copied().collect();
    let mut exclusions: Vec<Exclusion> = excluded
        .iter()
        .map(|&id| Exclusion {
            node_id: id,
            reason: "excluded by configuration".into(),
        })
        .collect();

    let mut kept: Vec<(&RawReading, [f64; 3])> = Vec::new();
    for r in &log.rows {
        if excluded.contains(&r.node_id) {
            counts.dropped_excluded_node += 1;
        } else if r.node_id < opts.node_range.0 || r.node_id > opts.node_range.1 {
            counts.dropped_unknown_node += 1;
        } else {
            match (r.humidity, r.temperature, r.voltage) {
                (Some(h), Some(t), Some(v)) => {
                    if t > opts.max_temperature || h < opts.min_humidity {
                        counts.dropped_out_of_range += 1;
                    } else {
                        kept.push((r, [h, t, v]));
                    }
                }
                _ => counts.dropped_incomplete += 1,
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::Format("no readings survive cleaning".into()));
    }

    let t0 = kept.iter().map(|(r, _)| r.timestamp).min().expect("nonempty");
    let period_ms = opts.period_seconds * 1000.0;
    let slot_of = |ts: NaiveDateTime| ((ts - t0).num_milliseconds() as f64 / period_ms).round() as usize;
    let grid_len = kept.iter().map(|(r, _)| slot_of(r.timestamp)).max().expect("nonempty") + 1;
    counts.grid_length = grid_len;

    // per node: per modality: (sum, count) per slot
    let mut acc: BTreeMap<u32, Vec<Vec<(f64, u32)>>> = BTreeMap::new();
    for (r, vals) in &kept {
        let slot = slot_of(r.timestamp);
        let series = acc.entry(r.node_id).or_insert_with(|| vec![vec![(0.0, 0); grid_len]; 3]);
        for (m, v) in vals.iter().enumerate() {
            series[m][slot].0 += v;
            series[m][slot].1 += 1;
        }
    }

    let mut nodes: Vec<(u32, Vec<Vec<Option<f64>>>)> = Vec::new();
    for (id, series) in acc {
        let mut filled: Vec<Vec<Option<f64>>> = series
            .into_iter()
            .map(|s| s.into_iter().map(|(sum, n)| (n > 0).then(|| sum / n as f64)).collect())
            .collect();
        for s in filled.iter_mut() {
            counts.interpolated_cells += fill_gaps(s, opts.max_gap);
        }
        let missing = (0..grid_len).filter(|&t| filled.iter().any(|s| s[t].is_none())).count();
        let frac = missing as f64 / grid_len as f64;
        if frac > opts.max_missing_fraction {
            log::warn!("node {id} missing {:.1}% of samples; excluded", 100.0 * frac);
            exclusions.push(Exclusion {
                node_id: id,
                reason: format!("{:.1}% of samples missing after cleaning", 100.0 * frac),
            });
        } else {
            nodes.push((id, filled));
        }
    }
    if nodes.is_empty() {
        return Err(Error::Format("every node was excluded during cleaning".into()));
    }

    let complete: Vec<bool> = (0..grid_len)
        .map(|t| nodes.iter().all(|(_, s)| s.iter().all(|m| m[t].is_some())))
        .collect();
    let (start, len) = runs(&complete)
        .into_iter()
        .fold((0, 0), |best, r| if r.1 > best.1 { r } else { best });
    if len == 0 {
        return Err(Error::Format("no time step is observed on every kept node".into()));
    }
    counts.kept_length = len;

    let n = nodes.len();
    let mut raw = Tensor::zeros(&[n, 3, len]);
    for (i, (_, series)) in nodes.iter().enumerate() {
        for (m, s) in series.iter().enumerate() {
            for t in 0..len {
                raw.set3(i, m, t, s[start + t].expect("complete run"));
            }
        }
    }
    let node_ids = nodes.iter().map(|(id, _)| *id).collect();
    let mut ds = CleanDataset::from_raw(&raw, node_ids, IBRL_MODALITIES.iter().map(|s| s.to_string()).collect())?;
    exclusions.sort_by_key(|e| e.node_id);
    ds.exclusions = exclusions;
    ds.counts = counts;
    ds.period_seconds = opts.period_seconds;
    ds.start_time = Some(t0 + TimeDelta::milliseconds((start as f64 * period_ms).round() as i64));
    Ok(ds)
}
