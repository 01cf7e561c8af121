//! Synthetic anomalies with recorded ground truth.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::windows::{Cell, LabeledWindowSet, Provenance};
use crate::error::{Error, Result};

/// Adds `α(X^max − X^min)` to a random `rate` share of the cells that fall in
/// some detection tail, using each series' clean extremes.
pub fn inject_anomalies(ws: &LabeledWindowSet, alpha: f64, rate: f64, seed: u64) -> Result<LabeledWindowSet> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::Config(format!("injection magnitude must be nonzero and finite, got {alpha}")));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Config(format!("injection rate must lie in (0, 1), got {rate}")));
    }
    let (n, m) = (ws.n_nodes(), ws.n_modalities());
    let span = ws.tail_span();
    let candidates: Vec<Cell> = (0..n)
        .flat_map(|node| (0..m).map(move |modality| (node, modality)))
        .flat_map(|(node, modality)| span.clone().map(move |t| Cell { node, modality, t }))
        .filter(|c| !ws.labels.contains_key(c))
        .collect();
    let count = (rate * candidates.len() as f64).round() as usize;
    let mut out = ws.clone();
    if count == 0 {
        log::warn!(
            "rate {rate} selects no cells out of {}; nothing injected",
            candidates.len()
        );
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), count).into_vec();
    picked.sort_unstable();
    let t_len = ws.timeline_len();
    for i in picked {
        let c = candidates[i];
        let series = c.node * m + c.modality;
        let range = ws.clean_max[series] - ws.clean_min[series];
        out.timeline.data_mut()[series * t_len + c.t] += alpha * range;
        out.labels.insert(c, Provenance::Injected { alpha });
    }
    Ok(out)
}

/// Where to break the correlation between two modalities of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationAnomaly {
    pub node: usize,
    /// Modality whose values are rewritten and labelled.
    pub modality: usize,
    /// Modality it is normally correlated with; left untouched.
    pub partner: usize,
    /// Timeline range.
    pub span: Range<usize>,
}

/// Reflects `modality` about its mean over the span, which reverses the sign
/// of its correlation with every other series there. Values are clipped to
/// the series' clean range so no pointwise range check can see the change.
pub fn inject_correlation_anomaly(ws: &LabeledWindowSet, spec: &CorrelationAnomaly) -> Result<LabeledWindowSet> {
    let (n, m, t_len) = (ws.n_nodes(), ws.n_modalities(), ws.timeline_len());
    if spec.node >= n || spec.modality >= m || spec.partner >= m || spec.modality == spec.partner {
        return Err(Error::Config(format!("invalid correlation anomaly target {spec:?}")));
    }
    if spec.span.start > spec.span.end || spec.span.end > t_len {
        return Err(Error::Config(format!("span {:?} outside timeline 0..{t_len}", spec.span)));
    }
    let mut out = ws.clone();
    if spec.span.is_empty() {
        return Ok(out);
    }
    let series = spec.node * m + spec.modality;
    let base = series * t_len;
    let (lo, hi) = (ws.clean_min[series], ws.clean_max[series]);
    let values = &mut out.timeline.data_mut()[base + spec.span.start..base + spec.span.end];
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in values.iter_mut() {
        *v = (2.0 * mean - *v).clamp(lo, hi);
    }
    for t in spec.span.clone() {
        out.labels.insert(
            Cell {
                node: spec.node,
                modality: spec.modality,
                t,
            },
            Provenance::Correlation,
        );
    }
    Ok(out)
}

/// Pearson sample correlation; 0 when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::windows::make_windows;
    use crate::tensor::Tensor;

    fn set() -> LabeledWindowSet {
        // node 0: humidity = −temperature + small wiggle
        let t = 200;
        let mut data = Vec::new();
        let temp: Vec<f64> = (0..t).map(|i| (i as f64 * 0.1).sin()).collect();
        data.extend(temp.iter().enumerate().map(|(i, v)| -v + 0.05 * (i as f64 * 1.7).cos()));
        data.extend(temp.iter().copied());
        Tensor::new(vec![1, 2, t], data)
            .and_then(|x| make_windows(&x, 40, 20, 20))
            .unwrap()
    }

    #[test]
    fn point_injection_arithmetic() {
        let x = Tensor::new(vec![1, 1, 4], vec![0.0, 0.5, 1.0, 0.2]).unwrap();
        let ws = make_windows(&x, 4, 2, 3).unwrap();
        let out = inject_anomalies(&ws, 0.5, 0.34, 1).unwrap();
        let cell = *out.labels.keys().next().unwrap();
        let before = ws.timeline.data()[cell.t];
        assert_eq!(out.timeline.data()[cell.t], before + 0.5);
        if cell.t == 1 {
            assert_eq!(out.timeline.data()[1], 1.0);
        }
        // α = −1 at the maximum lands at min − (max − x) = min
        let out = inject_anomalies(&ws, -1.0, 0.9, 4).unwrap();
        assert_eq!(out.labels.len(), 3);
        assert_eq!(out.timeline.data()[2], 0.0 - (1.0 - 1.0));
        assert_eq!(out.labels[&Cell { node: 0, modality: 0, t: 2 }], Provenance::Injected { alpha: -1.0 });
    }

    #[test]
    fn injection_is_seeded_and_leaves_other_cells_alone() {
        let ws = set();
        let a = inject_anomalies(&ws, 1.0, 0.05, 7).unwrap();
        let b = inject_anomalies(&ws, 1.0, 0.05, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.labels, inject_anomalies(&ws, 1.0, 0.05, 8).unwrap().labels);
        let t = ws.timeline_len();
        for (i, (x, y)) in ws.timeline.data().iter().zip(a.timeline.data()).enumerate() {
            let cell = Cell { node: 0, modality: i / t, t: i % t };
            if !a.labels.contains_key(&cell) {
                assert_eq!(x.to_bits(), y.to_bits());
            } else {
                assert!(ws.tail_span().contains(&cell.t));
            }
        }
    }

    #[test]
    fn invalid_injection_parameters() {
        let ws = set();
        assert!(matches!(inject_anomalies(&ws, 0.0, 0.1, 0), Err(Error::Config(_))));
        assert!(matches!(inject_anomalies(&ws, 1.0, 0.0, 0), Err(Error::Config(_))));
        assert!(matches!(inject_anomalies(&ws, 1.0, 1.0, 0), Err(Error::Config(_))));
        let none = inject_anomalies(&ws, 1.0, 1e-9, 0).unwrap();
        assert!(none.labels.is_empty());
    }

    #[test]
    fn correlation_anomaly_flips_sign_within_range() {
        let ws = set();
        let spec = CorrelationAnomaly {
            node: 0,
            modality: 0,
            partner: 1,
            span: 60..120,
        };
        let t = ws.timeline_len();
        let d = ws.timeline.data();
        assert!(correlation(&d[60..120], &d[t + 60..t + 120]) < 0.0);
        let out = inject_correlation_anomaly(&ws, &spec).unwrap();
        let o = out.timeline.data();
        assert!(correlation(&o[60..120], &o[t + 60..t + 120]) > 0.0);
        assert!(o[60..120].iter().all(|v| (ws.clean_min[0]..=ws.clean_max[0]).contains(v)));
        assert_eq!(&o[t..], &d[t..]);
        assert!(out.labels.keys().all(|c| c.modality == 0 && spec.span.contains(&c.t)));
        assert_eq!(out.labels.len(), 60);

        let empty = CorrelationAnomaly { span: 80..80, ..spec.clone() };
        assert_eq!(inject_correlation_anomaly(&ws, &empty).unwrap(), ws);
        let outside = CorrelationAnomaly { span: 150..250, ..spec };
        assert!(matches!(inject_correlation_anomaly(&ws, &outside), Err(Error::Config(_))));
    }
}
