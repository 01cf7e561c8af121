use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Tensor};

/// DFT of a real tensor along its last axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    pub amplitudes: ComplexTensor,
    pub source_length: usize,
}

/// Real signal recovered by [`idft`], plus the largest imaginary component
/// that was discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSignal {
    pub values: Tensor,
    pub max_imag_residue: f64,
}

/// `e^{-i2πm/L}` for `m = 0..L`; exponents are reduced modulo `L` before
/// evaluation so large products `k·n` stay exact.
fn twiddles(len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|m| {
            let angle = -TAU * m as f64 / len as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

/// Forward transform `X(k) = Σ_n x(n)·e^{−i2πkn/L}` along the last axis.
pub fn dft(x: &Tensor) -> Result<ComplexSpectrum> {
    let len = x.last_dim();
    if len == 0 {
        return Err(Error::dim("dft", x.shape(), &[1]));
    }
    let tw = twiddles(len);
    let mut out = Vec::with_capacity(x.len());
    for series in x.data().chunks(len) {
        for k in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &v) in series.iter().enumerate() {
                acc += tw[(k * n) % len] * v;
            }
            out.push(acc);
        }
    }
    Ok(ComplexSpectrum {
        amplitudes: ComplexTensor::new(x.shape().to_vec(), out)?,
        source_length: len,
    })
}

/// Inverse transform `x(n) = (1/L)·Σ_k X(k)·e^{i2πkn/L}`; the real part is
/// returned and the imaginary residue reported.
pub fn idft(s: &ComplexSpectrum) -> Result<RealSignal> {
    let shape = s.amplitudes.shape();
    let len = shape.last().copied().unwrap_or(0);
    if len == 0 {
        return Err(Error::dim("idft", shape, &[1]));
    }
    let tw = twiddles(len);
    let scale = 1.0 / len as f64;
    let mut values = Vec::with_capacity(s.amplitudes.data().len());
    let mut residue = 0.0f64;
    for spec in s.amplitudes.data().chunks(len) {
        for n in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in spec.iter().enumerate() {
                acc += c * tw[(k * n) % len].conj();
            }
            acc *= scale;
            values.push(acc.re);
            residue = residue.max(acc.im.abs());
        }
    }
    Ok(RealSignal {
        values: Tensor::new(shape.to_vec(), values)?,
        max_imag_residue: residue,
    })
}

/// Real and imaginary DFT kernels as `L×L` matrices `C[n][k] = cos(2πkn/L)`
/// and `S[n][k] = sin(2πkn/L)`, so that for a row vector `x`,
/// `Re X = x·C` and `Im X = −x·S`.
pub fn dft_matrices(len: usize) -> (Tensor, Tensor) {
    let tw = twiddles(len);
    let mut c = Tensor::zeros(&[len, len]);
    let mut s = Tensor::zeros(&[len, len]);
    for n in 0..len {
        for k in 0..len {
            let t = tw[(k * n) % len];
            c.data_mut()[n * len + k] = t.re;
            s.data_mut()[n * len + k] = -t.im;
        }
    }
    (c, s)
}

/// Amplitude (complex modulus) per frequency bin of a single series.
pub fn amplitude_spectrum(x: &[f64]) -> Result<Vec<f64>> {
    let t = Tensor::new(vec![x.len()], x.to_vec())?;
    Ok(dft(&t)?.amplitudes.norm().into_data())
}

/// Share of total spectral energy held by the `k` largest-amplitude bins.
pub fn top_k_energy_fraction(amplitudes: &[f64], k: usize) -> f64 {
    let mut energy: Vec<f64> = amplitudes.iter().map(|a| a * a).collect();
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    energy.sort_by(|a, b| b.total_cmp(a));
    energy.iter().take(k).sum::<f64>() / total
}

/// Indices of the `k` largest-amplitude bins, largest first.
pub fn top_k_bins(amplitudes: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..amplitudes.len()).collect();
    idx.sort_by(|&a, &b| amplitudes[b].total_cmp(&amplitudes[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Writes `freq_index,amplitude` rows for every bin of `x` and returns the
/// amplitudes. Bins below `1e-12` of the peak are rounding noise and are
/// reported as exactly zero.
pub fn spectrum_report<W: Write>(x: &[f64], mut out: W) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Contract("spectrum of an empty series".into()));
    }
    let mut amps = amplitude_spectrum(x)?;
    let floor = 1e-12 * amps.iter().copied().fold(0.0, f64::max);
    amps.iter_mut().filter(|a| **a < floor).for_each(|a| *a = 0.0);
    let io = |e| Error::io("<spectrum sink>", e);
    writeln!(out, "freq_index,amplitude").map_err(io)?;
    for (k, a) in amps.iter().enumerate() {
        writeln!(out, "{k},{a}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(v: Vec<f64>) -> Tensor {
        Tensor::new(vec![v.len()], v).unwrap()
    }

    #[test]
    fn constant_is_dc_only() {
        let s = dft(&series(vec![1.5; 8])).unwrap();
        let d = s.amplitudes.data();
        assert!((d[0].re - 12.0).abs() < 1e-12 && d[0].im.abs() < 1e-12);
        assert!(d[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn single_tone_energy_at_one_and_l_minus_one() {
        let l = 16;
        let x: Vec<f64> = (0..l).map(|n| (TAU * n as f64 / l as f64).cos()).collect();
        let a = amplitude_spectrum(&x).unwrap();
        for (k, v) in a.iter().enumerate() {
            if k == 1 || k == l - 1 {
                assert!((v - 8.0).abs() < 1e-10);
            } else {
                assert!(v.abs() < 1e-10, "bin {k}: {v}");
            }
        }
    }

    #[test]
    fn idft_simple_spectra() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 5];
        amps[0] = Complex64::new(5.0, 0.0);
        let s = ComplexSpectrum {
            amplitudes: ComplexTensor::new(vec![5], amps).unwrap(),
            source_length: 5,
        };
        let r = idft(&s).unwrap();
        assert!(r.values.data().iter().all(|v| (v - 1.0).abs() < 1e-14));

        let zero = ComplexSpectrum {
            amplitudes: ComplexTensor::new(vec![4], vec![Complex64::new(0.0, 0.0); 4]).unwrap(),
            source_length: 4,
        };
        assert_eq!(idft(&zero).unwrap().values.data(), &[0.0; 4]);
    }

    #[test]
    fn round_trip_150() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::uniform(&[150], 1.0, &mut rng);
        let r = idft(&dft(&x).unwrap()).unwrap();
        assert!(r.values.max_abs_diff(&x) < 1e-9);
        assert!(r.max_imag_residue < 1e-9);
    }

    #[test]
    fn matrices_agree_with_direct_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::uniform(&[1, 10], 1.0, &mut rng);
        let (c, s) = dft_matrices(10);
        let re = x.matmul(&c).unwrap();
        let im = x.matmul(&s).unwrap().scale(-1.0);
        let d = dft(&x).unwrap();
        assert!(re.max_abs_diff(&d.amplitudes.re()) < 1e-12);
        assert!(im.max_abs_diff(&d.amplitudes.im()) < 1e-12);
    }

    #[test]
    fn report_rows_and_tone_peak() {
        let mut buf = Vec::new();
        let amps = spectrum_report(&[2.0; 6], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "freq_index,amplitude");
        assert_eq!(lines.len(), 7);
        assert!(text.ends_with('\n'));
        assert!(lines[1..].iter().all(|l| !l.contains('e')), "no exponent notation: {text}");
        assert_eq!(amps.iter().filter(|a| **a != 0.0).count(), 1);
        assert_eq!(lines[1], "0,12");

        let l = 32;
        let tone: Vec<f64> = (0..l).map(|n| (TAU * 3.0 * n as f64 / l as f64).sin()).collect();
        let a = amplitude_spectrum(&tone).unwrap();
        assert!(top_k_bins(&a[..l / 2], 1) == vec![3]);
        assert!(spectrum_report(&[], Vec::new()).is_err());
    }
}
