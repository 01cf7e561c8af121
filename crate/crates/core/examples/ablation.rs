//! Component sizes and reconstruction loss for each ablation switch on the
//! same training data.
//!
//! `cargo run --release --example ablation [epochs]`

use wsn_anomaly::data::*;
use wsn_anomaly::graph::{build_adjacency, GraphMode};
use wsn_anomaly::model::*;

fn main() -> wsn_anomaly::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let syn = synth_generate(&SynthConfig { length: 1500, ..Default::default() })?;
    let ws = make_windows(&syn.dataset.values, 64, 32, 32)?;
    let windows = ws.windows();
    let adj = build_adjacency(&syn.positions, 4)?;
    let base = ModelConfig {
        window: 64,
        step: 32,
        detect_tail: 32,
        epochs,
        ..Default::default()
    };
    let variants = [
        ("full model", base.clone()),
        ("moving average", ModelConfig { decomposition: Decomposition::MovingAverage, ..base.clone() }),
        ("time-domain attention", ModelConfig { seasonal_attention: SeasonalAttention::Time, ..base.clone() }),
        ("static graph", ModelConfig { graph: GraphMode::StaticGcn, ..base.clone() }),
    ];
    println!("{:<22} {:>10} {:>10} {:>12}", "variant", "component", "params", "final loss");
    for (name, cfg) in variants {
        let (p, log) = train(&windows, &cfg, &adj)?;
        println!(
            "{name:<22} {:>10} {:>10} {:>12.5}",
            cfg.component_len(),
            p.parameter_count(),
            log.epoch_losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
