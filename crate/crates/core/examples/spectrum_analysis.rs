//! Amplitude spectra of a clean tone and of the same tone with spikes: the
//! spikes move energy out of the dominant bins.

use wsn_anomaly::signal::{amplitude_spectrum, spectrum_report, top_k_bins, top_k_energy_fraction};

fn main() -> wsn_anomaly::Result<()> {
    let len = 128;
    let clean: Vec<f64> = (0..len)
        .map(|t| (2.0 * std::f64::consts::PI * 6.0 * t as f64 / len as f64).sin())
        .collect();
    let mut spiky = clean.clone();
    for t in [17, 60, 101] {
        spiky[t] += 2.5;
    }
    let a = amplitude_spectrum(&clean)?;
    let b = amplitude_spectrum(&spiky)?;
    println!("clean top bins {:?}, top-3 energy share {:.4}", top_k_bins(&a, 3), top_k_energy_fraction(&a, 3));
    println!("spiky top bins {:?}, top-3 energy share {:.4}", top_k_bins(&b, 3), top_k_energy_fraction(&b, 3));
    let mut csv = Vec::new();
    spectrum_report(&spiky, &mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    println!("first rows of the spectrum CSV:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
