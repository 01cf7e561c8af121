//! Clean a lab-format mote log: drop excluded and out-of-range readings,
//! align to the sampling grid, fill short gaps and z-score each series.
//!
//! `cargo run --example ibrl_preprocess [path/to/labdata.txt]`; without a
//! path a small generated log is used.

use std::fmt::Write as _;

use wsn_anomaly::data::{clean_and_align, ingest_ibrl, CleaningOptions};

fn generated_log() -> String {
    let mut s = String::new();
    for slot in 0..60 {
        for node in [1u32, 2, 3, 5, 15] {
            if node == 3 && (20..24).contains(&slot) {
                continue;
            }
            let secs = 31 * slot;
            let x = slot as f64;
            let temp = if node == 2 && slot == 30 { 122.0 } else { 19.0 + 0.05 * x + node as f64 };
            let _ = writeln!(
                s,
                "2004-03-01 {:02}:{:02}:{:02}.000000 {slot} {node} {temp} {} 120.0 {}",
                secs / 3600,
                secs / 60 % 60,
                secs % 60,
                38.0 - 0.1 * x + (x / 5.0).sin(),
                2.7 - 0.0005 * x
            );
        }
    }
    s.push_str("2004-03-01 not-a-row\n");
    s
}

fn main() -> wsn_anomaly::Result<()> {
    let log = match std::env::args().nth(1) {
        Some(path) => {
            let f = std::fs::File::open(&path).map_err(|e| wsn_anomaly::Error::Io { path: path.into(), source: e })?;
            ingest_ibrl(std::io::BufReader::new(f))?
        }
        None => ingest_ibrl(generated_log().as_bytes())?,
    };
    let ds = clean_and_align(&log, &CleaningOptions::default())?;
    println!("{} rows read, {} malformed", ds.counts.rows_in, ds.counts.malformed_rows);
    println!("{:#?}", ds.counts);
    for e in &ds.exclusions {
        println!("excluded node {}: {}", e.node_id, e.reason);
    }
    println!(
        "kept nodes {:?}, modalities {:?}, {} aligned samples",
        ds.node_ids,
        ds.modalities,
        ds.len()
    );
    Ok(())
}
