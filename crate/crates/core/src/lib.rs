//! Multimodal sensor-network anomaly detection.
//!
//! Windows of `nodes × modalities × time` readings are split into trend and
//! seasonal parts by a one-level wavelet transform. The trend goes through a
//! per-series MLP, the seasonal part through attention computed on its
//! Fourier spectrum, and each branch then through a dynamic graph
//! convolution that reweights the sensor topology and fuses modalities with
//! cross-attention. An inverse wavelet transform plus a linear map
//! reconstructs the window; squared reconstruction error is the anomaly
//! score.
//!
//! Modules, bottom-up:
//!
//! - [`tensor`]: dense tensors, a reverse-mode gradient tape, Adam.
//! - [`signal`]: Mallat DWT/IDWT and DFT/IDFT.
//! - [`graph`]: adjacency construction, spatial correlation, modal fusion,
//!   graph convolution layers.
//! - [`model`]: the autoencoder, training, scoring and thresholding.
//! - [`data`]: IBRL ingestion and cleaning, windowing, synthetic data,
//!   anomaly injection.
//! - [`eval`]: confusion counts, precision/recall/F1, ROC AUC, resampling
//!   and robustness sweeps.
//! - [`cli`]: the `wsn-anomaly` command-line front end.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod signal;
pub mod tensor;

pub use error::{Error, Result};
