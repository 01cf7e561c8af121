//! Wavelet analysis/synthesis and discrete Fourier transforms.

mod fourier;
mod wavelet;

pub use fourier::{
    amplitude_spectrum, dft, dft_matrices, idft, spectrum_report, top_k_bins, top_k_energy_fraction,
    ComplexSpectrum, RealSignal,
};
pub use wavelet::{
    dwt_level1, dwt_series, idwt_level1, idwt_series, synthesis_matrices, wavedec, waverec,
    DecomposedSeries, WaveletFilterPair,
};
