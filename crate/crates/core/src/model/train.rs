use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{check_window, decompose, forward_on, mse_on, reconstruct_with, Bound, Transforms};
use super::params::is_decayed;
use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor};

/// Per-epoch mean training loss.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
    pub optimizer_steps: u64,
}

impl TrainingLog {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["epoch", "loss"]).map_err(fmt)?;
        for (i, l) in self.epoch_losses.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()]).map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::io("<loss csv>", e))
    }
}

/// Trains fresh parameters on clean windows `N×M×W`.
pub fn train(windows: &[Tensor], cfg: &ModelConfig, adjacency: &AdjacencyMatrix) -> Result<(ModelParams, TrainingLog)> {
    let m = windows.first().map(|w| w.shape().get(1).copied().unwrap_or(0)).unwrap_or(0);
    let params = ModelParams::init(cfg, m, adjacency.clone())?;
    train_from(params, windows, |_, _| {})
}

/// Continues training `params`, calling `on_epoch(epoch, loss)` after each
/// epoch (1-based).
pub fn train_from<F>(mut params: ModelParams, windows: &[Tensor], mut on_epoch: F) -> Result<(ModelParams, TrainingLog)>
where
    F: FnMut(usize, f64),
{
    if windows.is_empty() {
        return Err(Error::Contract("training needs at least one window".into()));
    }
    for w in windows {
        check_window(w, &params)?;
    }
    let cfg = params.config.clone();
    let tr = Transforms::new(&cfg)?;
    let parts = windows.iter().map(|w| decompose(w, &cfg)).collect::<Result<Vec<_>>>()?;
    let adam_cfg = AdamConfig {
        lr: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mask = params.names().iter().map(|n| is_decayed(n)).collect();
    let mut adam = Adam::new(adam_cfg, params.tensors()).with_decay_mask(mask)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let shapes: Vec<Vec<usize>> = params.tensors().iter().map(|t| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let names = params.names().to_vec();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Tensor>> = None;
            for &i in batch {
                let mut tape = Tape::new();
                let b = Bound::new(&mut tape, &params, true);
                let f = forward_on(&mut tape, &b, &tr, &parts[i])?;
                let x = tape.constant(windows[i].clone());
                let loss = mse_on(&mut tape, x, f.reconstruction)?;
                let value = tape.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::Training(format!(
                        "loss is {value} at epoch {epoch}, window {i}; parameters finite: {}",
                        params.is_finite()
                    )));
                }
                total += value;
                let grads = tape.backward(loss)?.params(&shape_refs);
                acc = Some(match acc {
                    None => grads,
                    Some(prev) => prev.iter().zip(&grads).map(|(a, g)| a.add(g)).collect::<Result<_>>()?,
                });
            }
            let mut grads = acc.expect("chunks are nonempty");
            if batch.len() > 1 {
                let s = 1.0 / batch.len() as f64;
                grads.iter_mut().for_each(|g| *g = g.scale(s));
            }
            adam.step(params.tensors_mut(), &grads, &names)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        let mean = total / windows.len() as f64;
        log::debug!("epoch {epoch}: loss {mean}");
        log.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    if !params.is_finite() {
        return Err(Error::Training("parameters became non-finite".into()));
    }
    log.optimizer_steps = adam.steps_taken();
    params.trained = true;
    Ok((params, log))
}

/// Squared residuals over the detection tail of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyScoreGrid {
    /// `N×M×detect_tail`.
    pub scores: Tensor,
    pub threshold: Option<f64>,
}

/// Binary labels with the same layout as a score grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrid {
    pub shape: Vec<usize>,
    pub labels: Vec<u8>,
}

impl LabelGrid {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            labels: vec![0; shape.iter().product()],
        }
    }

    pub fn new(shape: Vec<usize>, labels: Vec<u8>) -> Result<Self> {
        if shape.iter().product::<usize>() != labels.len() {
            return Err(Error::dim("label grid", &shape, &[labels.len()]));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Format("labels must be 0 or 1".into()));
        }
        Ok(Self { shape, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Scores from an explicit reconstruction: `(x − x̂)²` over the last `tail`
/// steps.
pub fn residual_scores(x: &Tensor, x_hat: &Tensor, tail: usize) -> Result<AnomalyScoreGrid> {
    if x.shape() != x_hat.shape() || x.ndim() != 3 {
        return Err(Error::dim("score", x.shape(), x_hat.shape()));
    }
    let w = x.last_dim();
    if tail == 0 || tail > w {
        return Err(Error::Config(format!("detect tail {tail} outside 1..={w}")));
    }
    let (n, m) = (x.shape()[0], x.shape()[1]);
    let data = x
        .data()
        .chunks(w)
        .zip(x_hat.data().chunks(w))
        .flat_map(|(a, b)| (w - tail..w).map(move |t| (a[t] - b[t]).powi(2)))
        .collect();
    Ok(AnomalyScoreGrid {
        scores: Tensor::new(vec![n, m, tail], data)?,
        threshold: None,
    })
}

/// Anomaly scores of one window; carries the calibrated threshold if any.
pub fn score(x: &Tensor, params: &ModelParams) -> Result<AnomalyScoreGrid> {
    let tr = Transforms::new(&params.config)?;
    score_with(x, params, &tr)
}

/// Scores many windows, sharing the precomputed transforms.
pub fn score_all(windows: &[Tensor], params: &ModelParams) -> Result<Vec<AnomalyScoreGrid>> {
    let tr = Transforms::new(&params.config)?;
    windows.iter().map(|w| score_with(w, params, &tr)).collect()
}

fn score_with(x: &Tensor, params: &ModelParams, tr: &Transforms) -> Result<AnomalyScoreGrid> {
    if !params.trained {
        return Err(Error::Contract("scoring requires trained parameters".into()));
    }
    let x_hat = reconstruct_with(x, params, tr)?;
    let mut grid = residual_scores(x, &x_hat, params.config.detect_tail)?;
    grid.threshold = params.threshold;
    Ok(grid)
}

/// Largest score over all cells of all training windows.
pub fn calibrate_threshold(training_scores: &[AnomalyScoreGrid]) -> Result<f64> {
    let cells = training_scores.iter().flat_map(|g| g.scores.data().iter().copied());
    let mut best: Option<f64> = None;
    for v in cells {
        if !v.is_finite() {
            return Err(Error::Contract("non-finite training score".into()));
        }
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or_else(|| Error::Contract("threshold calibration needs at least one score".into()))
}

/// `1` where `score > τ`, else `0`.
pub fn classify(grid: &AnomalyScoreGrid) -> Result<LabelGrid> {
    let tau = grid
        .threshold
        .ok_or_else(|| Error::Contract("classification needs a calibrated threshold".into()))?;
    Ok(LabelGrid {
        shape: grid.scores.shape().to_vec(),
        labels: grid.scores.data().iter().map(|&s| u8::from(s > tau)).collect(),
    })
}
