//! The reconstruction autoencoder: decomposition, trend and seasonal
//! encoders, decoder, training and threshold-based detection.

mod config;
mod forward;
mod params;
mod train;

pub use config::{Decomposition, ModelConfig, SeasonalAttention};
pub use forward::{
    capture, decode, decode_on, decompose, fdam, fdam_on, forward_on, loss_mse, moving_average_split, mse_on,
    reconstruct, seasonal_encode, seasonal_encode_on, trend_encode, trend_encode_on, Activations, Bound,
    FdamTrace, ForwardTrace, SeasonalTrace, Transforms, TrendTrace,
};
pub use params::{is_decayed, layout, ModelParams};
pub use train::{
    calibrate_threshold, classify, residual_scores, score, score_all, train, train_from, AnomalyScoreGrid,
    LabelGrid, TrainingLog,
};
