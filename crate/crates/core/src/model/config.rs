use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FusionReading, GraphMode};

/// How a window is split into trend and seasonal parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// One level of the Haar wavelet transform; both parts have length `W/2`.
    #[default]
    Dwt,
    /// Centered moving average; both parts keep length `W`.
    MovingAverage,
}

/// Domain in which the seasonal attention operates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalAttention {
    #[default]
    Frequency,
    Time,
}

/// Hyperparameters and ablation switches of the autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub window: usize,
    pub step: usize,
    pub detect_tail: usize,
    /// Width of the trend MLP's hidden layer.
    pub hidden: usize,
    /// Key width of the frequency-domain attention.
    pub attention_dim: usize,
    /// Key width of the cross-modal fusion attention.
    pub fusion_dim: usize,
    /// Graph layers per encoder.
    pub depth: usize,
    pub learning_rate: f64,
    /// Decoupled Adam weight decay.
    pub weight_decay: f64,
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub decomposition: Decomposition,
    pub seasonal_attention: SeasonalAttention,
    pub graph: GraphMode,
    pub fusion_reading: FusionReading,
    pub per_instant_weights: bool,
    /// Moving-average length for [`Decomposition::MovingAverage`]; odd.
    pub ma_window: usize,
    /// Neighbours per node when building the proximity graph.
    pub neighbors: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 300,
            step: 100,
            detect_tail: 100,
            hidden: 64,
            attention_dim: 32,
            fusion_dim: 32,
            depth: 1,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            epochs: 200,
            batch_size: 1,
            seed: 0,
            decomposition: Decomposition::Dwt,
            seasonal_attention: SeasonalAttention::Frequency,
            graph: GraphMode::Mfdgcn,
            fusion_reading: FusionReading::AsPrinted,
            per_instant_weights: false,
            ma_window: 25,
            neighbors: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.window % 2 != 0 {
            return Err(Error::WindowLength(self.window));
        }
        let checks = [
            (self.step == 0 || self.step > self.window, "step must satisfy 0 < step <= window"),
            (
                self.detect_tail == 0 || self.detect_tail > self.window,
                "detect_tail must satisfy 0 < detect_tail <= window",
            ),
            (self.hidden == 0, "hidden must be positive"),
            (self.attention_dim == 0, "attention_dim must be positive"),
            (self.fusion_dim == 0, "fusion_dim must be positive"),
            (self.depth == 0, "depth must be positive"),
            (self.batch_size == 0, "batch_size must be positive"),
            (
                !(self.learning_rate.is_finite() && self.learning_rate > 0.0),
                "learning_rate must be positive and finite",
            ),
            (
                !(self.weight_decay.is_finite() && self.weight_decay >= 0.0),
                "weight_decay must be non-negative and finite",
            ),
            (self.ma_window == 0 || self.ma_window % 2 == 0, "ma_window must be odd"),
            (self.neighbors == 0, "neighbors must be positive"),
        ];
        match checks.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::Config(format!("{msg} ({self:?})"))),
            None => Ok(()),
        }
    }

    /// Length of each decomposed component.
    pub fn component_len(&self) -> usize {
        match self.decomposition {
            Decomposition::Dwt => self.window / 2,
            Decomposition::MovingAverage => self.window,
        }
    }
}
