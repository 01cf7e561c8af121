//! Train on clean synthetic windows, calibrate the threshold, inject point
//! anomalies into held-out windows and report detection metrics.
//!
//! `cargo run --release --example train_and_detect [epochs]`

use wsn_anomaly::data::*;
use wsn_anomaly::eval::detect;
use wsn_anomaly::graph::build_adjacency;
use wsn_anomaly::model::*;

fn main() -> wsn_anomaly::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
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
    let ws = make_windows(&syn.dataset.values, cfg.window, cfg.step, cfg.detect_tail)?;
    let split = ws.len() * 6 / 10;
    let train_windows = ws.subset(0..split)?.windows();
    let test = ws.subset(split + 1..ws.len())?;
    let adj = build_adjacency(&syn.positions, cfg.neighbors)?;

    let (mut params, log) = train_from(ModelParams::init(&cfg, 3, adj)?, &train_windows, |e, l| {
        if e % 25 == 0 {
            println!("epoch {e:>3}: loss {l:.5}");
        }
    })?;
    let tau = calibrate_threshold(&score_all(&train_windows, &params)?)?;
    params.threshold = Some(tau);
    println!("{} parameters, {} optimizer steps, threshold {tau:.4}", params.parameter_count(), log.optimizer_steps);

    let clean = detect(&params, &test)?.report()?;
    println!("clean held-out windows: {} false positives of {} cells", clean.counts.fp, clean.counts.total());
    for alpha in [1.0, -1.0] {
        let r = detect(&params, &inject_anomalies(&test, alpha, 0.01, 11)?)?.report()?;
        println!(
            "alpha {alpha:+}: precision {:.3} recall {:.3} F1 {:.3} AUC {:.4}",
            r.precision,
            r.recall,
            r.f1,
            r.auc.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
