//! One-level Haar split of a noisy periodic series into trend and seasonal
//! halves, and its exact reconstruction.

use wsn_anomaly::signal::{dwt_series, idwt_series, WaveletFilterPair};

fn main() -> wsn_anomaly::Result<()> {
    let x: Vec<f64> = (0..64)
        .map(|t| {
            let t = t as f64;
            (t / 10.0).sin() + 0.3 * (t * 2.5).sin()
        })
        .collect();
    let haar = WaveletFilterPair::haar();
    let (trend, seasonal) = dwt_series(&x, &haar)?;
    let back = idwt_series(&trend, &seasonal, &haar)?;
    let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let energy = |v: &[f64]| v.iter().map(|s| s * s).sum::<f64>();
    println!("length {} -> trend {} + seasonal {}", x.len(), trend.len(), seasonal.len());
    println!(
        "energy: signal {:.4}, trend {:.4}, seasonal {:.4}",
        energy(&x),
        energy(&trend),
        energy(&seasonal)
    );
    println!("reconstruction max error {err:.2e}");
    Ok(())
}
