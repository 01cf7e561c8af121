//! Finite-difference gradient checking.

use super::Tensor;

/// Central difference `(f(p + h·e) − f(p − h·e)) / 2h` for every element of
/// `params[slot]`.
pub fn numeric_gradient<F>(mut f: F, params: &[Tensor], slot: usize, h: f64) -> Tensor
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work = params.to_vec();
    let mut out = Tensor::zeros(params[slot].shape());
    for i in 0..params[slot].len() {
        let orig = work[slot].data()[i];
        work[slot].data_mut()[i] = orig + h;
        let plus = f(&work);
        work[slot].data_mut()[i] = orig - h;
        let minus = f(&work);
        work[slot].data_mut()[i] = orig;
        out.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    out
}

/// `|a − b| / max(|a|, |b|, 1e-6)`; the floor keeps near-zero gradients from
/// turning rounding noise into large relative errors.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest elementwise [`relative_error`] between two tensors.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .fold(0.0, |m, (&a, &b)| m.max(relative_error(a, b)))
}
