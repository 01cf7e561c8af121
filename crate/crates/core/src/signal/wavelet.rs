//! Mallat filter-bank DWT with periodic boundary extension.
//!
//! Analysis follows the causal convolution-then-decimate form
//! `A(n) = Σ_k H(k)·x(2n − k)`, `D(n) = Σ_k G(k)·x(2n − k)`, with every
//! signal index taken modulo the series length. Synthesis is
//! `x(m) = Σ_k h(m − 2k)·A(k) + g(m − 2k)·D(k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Analysis and synthesis filters of a two-channel filter bank.
///
/// Synthesis taps are anti-causal: `synthesis_low[i]` is `h(−i)` and
/// `synthesis_high[i]` is `g(−i)`. With that convention an orthogonal bank
/// reuses its analysis coefficients verbatim for synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilterPair {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
    pub synthesis_low: Vec<f64>,
    pub synthesis_high: Vec<f64>,
}

impl WaveletFilterPair {
    pub fn haar() -> Self {
        Self::orthogonal(vec![std::f64::consts::FRAC_1_SQRT_2; 2])
    }

    /// Daubechies wavelet with two vanishing moments (four taps).
    pub fn daubechies2() -> Self {
        let s3 = 3f64.sqrt();
        let d = 4.0 * 2f64.sqrt();
        Self::orthogonal(vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d])
    }

    /// Orthogonal bank from a lowpass filter; the highpass is its quadrature
    /// mirror `G(k) = (−1)^k · H(L−1−k)`.
    pub fn orthogonal(lowpass: Vec<f64>) -> Self {
        let len = lowpass.len();
        let highpass: Vec<f64> = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - k]
            })
            .collect();
        Self {
            synthesis_low: lowpass.clone(),
            synthesis_high: highpass.clone(),
            lowpass,
            highpass,
        }
    }
}

impl Default for WaveletFilterPair {
    fn default() -> Self {
        Self::haar()
    }
}

/// Trend (approximation) and seasonal (detail) components of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedSeries {
    pub trend: Tensor,
    pub seasonal: Tensor,
    pub original_length: usize,
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn analyze(x: &[f64], filter: &[f64], out: &mut [f64]) {
    let w = x.len();
    for (n, o) in out.iter_mut().enumerate() {
        *o = filter
            .iter()
            .enumerate()
            .map(|(k, &c)| c * x[wrap(2 * n as isize - k as isize, w)])
            .sum();
    }
}

fn synthesize(a: &[f64], d: &[f64], filters: &WaveletFilterPair, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let w = out.len();
    // h(m − 2k) is nonzero only for m − 2k = −i, i.e. m = 2k − i.
    for k in 0..a.len() {
        for (i, &c) in filters.synthesis_low.iter().enumerate() {
            out[wrap(2 * k as isize - i as isize, w)] += c * a[k];
        }
        for (i, &c) in filters.synthesis_high.iter().enumerate() {
            out[wrap(2 * k as isize - i as isize, w)] += c * d[k];
        }
    }
}

/// Single-series level-1 analysis.
pub fn dwt_series(x: &[f64], filters: &WaveletFilterPair) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = x.len();
    if w < 2 || w % 2 != 0 {
        return Err(Error::WindowLength(w));
    }
    let mut a = vec![0.0; w / 2];
    let mut d = vec![0.0; w / 2];
    analyze(x, &filters.lowpass, &mut a);
    analyze(x, &filters.highpass, &mut d);
    Ok((a, d))
}

/// Single-series level-1 synthesis.
pub fn idwt_series(a: &[f64], d: &[f64], filters: &WaveletFilterPair) -> Result<Vec<f64>> {
    if a.len() != d.len() || a.is_empty() {
        return Err(Error::dim("idwt", &[a.len()], &[d.len()]));
    }
    let mut out = vec![0.0; 2 * a.len()];
    synthesize(a, d, filters, &mut out);
    Ok(out)
}

/// Level-1 DWT along the last axis of a tensor (typically `N×M×W`).
pub fn dwt_level1(x: &Tensor, filters: &WaveletFilterPair) -> Result<DecomposedSeries> {
    let w = x.last_dim();
    if w < 2 || w % 2 != 0 {
        return Err(Error::WindowLength(w));
    }
    let half = w / 2;
    let mut trend = Vec::with_capacity(x.len() / 2);
    let mut seasonal = Vec::with_capacity(x.len() / 2);
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for series in x.data().chunks(w) {
        analyze(series, &filters.lowpass, &mut a);
        analyze(series, &filters.highpass, &mut d);
        trend.extend_from_slice(&a);
        seasonal.extend_from_slice(&d);
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = half;
    Ok(DecomposedSeries {
        trend: Tensor::new(shape.clone(), trend)?,
        seasonal: Tensor::new(shape, seasonal)?,
        original_length: w,
    })
}

/// Inverse of [`dwt_level1`].
pub fn idwt_level1(d: &DecomposedSeries, filters: &WaveletFilterPair) -> Result<Tensor> {
    if d.trend.shape() != d.seasonal.shape() {
        return Err(Error::dim("idwt_level1", d.trend.shape(), d.seasonal.shape()));
    }
    let half = d.trend.last_dim();
    if half == 0 || 2 * half != d.original_length {
        return Err(Error::dim("idwt_level1", d.trend.shape(), &[d.original_length]));
    }
    let w = 2 * half;
    let mut out = vec![0.0; d.trend.len() * 2];
    for ((a, s), o) in d
        .trend
        .data()
        .chunks(half)
        .zip(d.seasonal.data().chunks(half))
        .zip(out.chunks_mut(w))
    {
        synthesize(a, s, filters, o);
    }
    let mut shape = d.trend.shape().to_vec();
    *shape.last_mut().unwrap() = w;
    Tensor::new(shape, out)
}

/// Multi-level decomposition: returns the coarsest approximation followed by
/// detail bands from coarsest to finest.
pub fn wavedec(x: &[f64], filters: &WaveletFilterPair, depth: usize) -> Result<Vec<Vec<f64>>> {
    if depth == 0 || x.len() % (1 << depth) != 0 {
        return Err(Error::WindowLength(x.len()));
    }
    let mut details = Vec::with_capacity(depth);
    let mut approx = x.to_vec();
    for _ in 0..depth {
        let (a, d) = dwt_series(&approx, filters)?;
        details.push(d);
        approx = a;
    }
    let mut out = vec![approx];
    out.extend(details.into_iter().rev());
    Ok(out)
}

/// Inverse of [`wavedec`].
pub fn waverec(bands: &[Vec<f64>], filters: &WaveletFilterPair) -> Result<Vec<f64>> {
    let (first, rest) = bands
        .split_first()
        .ok_or_else(|| Error::Contract("waverec needs at least one band".into()))?;
    let mut approx = first.clone();
    for d in rest {
        approx = idwt_series(&approx, d, filters)?;
    }
    Ok(approx)
}

/// Synthesis as two `half×(2·half)` matrices, so that a row vector of
/// coefficients reconstructs as `a·P_low + d·P_high`.
pub fn synthesis_matrices(filters: &WaveletFilterPair, half: usize) -> Result<(Tensor, Tensor)> {
    let w = 2 * half;
    let mut low = Tensor::zeros(&[half, w]);
    let mut high = Tensor::zeros(&[half, w]);
    let zero = vec![0.0; half];
    for k in 0..half {
        let mut unit = vec![0.0; half];
        unit[k] = 1.0;
        let rl = idwt_series(&unit, &zero, filters)?;
        let rh = idwt_series(&zero, &unit, filters)?;
        low.data_mut()[k * w..(k + 1) * w].copy_from_slice(&rl);
        high.data_mut()[k * w..(k + 1) * w].copy_from_slice(&rh);
    }
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S2: f64 = std::f64::consts::SQRT_2;

    /// Eqs. 4–5 by explicit double loop over output index and filter tap.
    fn direct_analysis(x: &[f64], f: &[f64]) -> Vec<f64> {
        let w = x.len() as isize;
        let mut out = Vec::new();
        for n in 0..(w / 2) {
            let mut acc = 0.0;
            for (k, c) in f.iter().enumerate() {
                let mut idx = 2 * n - k as isize;
                while idx < 0 {
                    idx += w;
                }
                acc += c * x[(idx % w) as usize];
            }
            out.push(acc);
        }
        out
    }

    #[test]
    fn haar_constant_and_alternating() {
        let f = WaveletFilterPair::haar();
        let (a, d) = dwt_series(&[2.5; 4], &f).unwrap();
        for v in &a {
            assert!((v - 2.5 * S2).abs() < 1e-14);
        }
        assert!(d.iter().all(|v| v.abs() < 1e-14));

        let (a, d) = dwt_series(&[1.0, -1.0, 1.0, -1.0], &f).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-14));
        for v in &d {
            assert!((v.abs() - S2).abs() < 1e-14);
        }
    }

    #[test]
    fn haar_inverse_of_constant_and_zero() {
        let f = WaveletFilterPair::haar();
        let x = idwt_series(&[3.0 * S2, 3.0 * S2], &[0.0, 0.0], &f).unwrap();
        for v in &x {
            assert!((v - 3.0).abs() < 1e-14);
        }
        assert_eq!(idwt_series(&[0.0; 3], &[0.0; 3], &f).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn haar_filter_properties() {
        let f = WaveletFilterPair::haar();
        let norm: f64 = f.lowpass.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-15);
        assert_eq!(f.highpass[0], f.lowpass[1]);
        assert_eq!(f.highpass[1], -f.lowpass[0]);
    }

    #[test]
    fn analysis_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in [WaveletFilterPair::haar(), WaveletFilterPair::daubechies2()] {
            let x = Tensor::uniform(&[16], 1.0, &mut rng);
            let (a, d) = dwt_series(x.data(), &f).unwrap();
            let (ea, ed) = (direct_analysis(x.data(), &f.lowpass), direct_analysis(x.data(), &f.highpass));
            for (u, v) in a.iter().zip(&ea).chain(d.iter().zip(&ed)) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_length_rejected() {
        let err = dwt_series(&[1.0, 2.0, 3.0], &WaveletFilterPair::haar()).unwrap_err();
        assert!(matches!(err, Error::WindowLength(3)));
        assert!(err.to_string().contains("pad or trim"));
    }

    #[test]
    fn tensor_round_trip_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = WaveletFilterPair::daubechies2();
        let x = Tensor::uniform(&[3, 2, 20], 1.0, &mut rng);
        let d = dwt_level1(&x, &f).unwrap();
        assert_eq!(d.trend.shape(), &[3, 2, 10]);
        assert!(idwt_level1(&d, &f).unwrap().max_abs_diff(&x) < 1e-12);

        let bad = DecomposedSeries {
            trend: Tensor::zeros(&[1, 4]),
            seasonal: Tensor::zeros(&[1, 3]),
            original_length: 8,
        };
        assert!(matches!(idwt_level1(&bad, &f), Err(Error::Dimension { .. })));
    }

    #[test]
    fn multilevel_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::uniform(&[64], 1.0, &mut rng);
        let bands = wavedec(x.data(), &WaveletFilterPair::haar(), 3).unwrap();
        assert_eq!(bands.iter().map(Vec::len).collect::<Vec<_>>(), vec![8, 8, 16, 32]);
        let back = waverec(&bands, &WaveletFilterPair::haar()).unwrap();
        for (u, v) in back.iter().zip(x.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_matrices_agree_with_idwt() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = WaveletFilterPair::daubechies2();
        let (pl, ph) = synthesis_matrices(&f, 6).unwrap();
        let a = Tensor::uniform(&[1, 6], 1.0, &mut rng);
        let d = Tensor::uniform(&[1, 6], 1.0, &mut rng);
        let via_mat = a.matmul(&pl).unwrap().add(&d.matmul(&ph).unwrap()).unwrap();
        let direct = idwt_series(a.data(), d.data(), &f).unwrap();
        for (u, v) in via_mat.data().iter().zip(&direct) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
