//! Detection quality across anomaly magnitudes, plus resampled reliability
//! statistics at |α| = 1.
//!
//! `cargo run --release --example robustness_sweep [epochs]`

use wsn_anomaly::data::*;
use wsn_anomaly::eval::*;
use wsn_anomaly::graph::build_adjacency;
use wsn_anomaly::model::*;

fn main() -> wsn_anomaly::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let syn = synth_generate(&SynthConfig::default())?;
    let cfg = ModelConfig {
        window: 64,
        step: 32,
        detect_tail: 32,
        epochs,
        weight_decay: 0.75,
        per_instant_weights: true,
        ..Default::default()
    };
    let ws = make_windows(&syn.dataset.values, 64, 32, 32)?;
    let split = ws.len() * 6 / 10;
    let train_windows = ws.subset(0..split)?.windows();
    let test = ws.subset(split + 1..ws.len())?;
    let (mut params, _) = train(&train_windows, &cfg, &build_adjacency(&syn.positions, 4)?)?;
    params.threshold = Some(calibrate_threshold(&score_all(&train_windows, &params)?)?);

    let rows = robustness_sweep(&params, &test, &DEFAULT_ALPHAS, 0.01, 11)?;
    write_sweep_csv(&rows, std::io::stdout())?;

    let det = detect(&params, &inject_anomalies(&test, 1.0, 0.01, 11)?)?;
    let segments = det.scores.len().min(9);
    let rel = reliability_resample(&det, segments, (segments * 7 / 9).max(1), 10, 0)?;
    println!(
        "resampled F1 mean {:.4} std {:.4}; AUC mean {:.4} std {:.4}",
        rel.f1.mean, rel.f1.std, rel.auc.mean, rel.auc.std
    );
    Ok(())
}
