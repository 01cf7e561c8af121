//! On-disk form of a [`CleanDataset`]: one CSV per modality (rows are time
//! steps, columns node ids), `positions.csv` when known, and a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::clean::CleanDataset;
use crate::error::{Error, Result};
use crate::graph::{read_positions, write_positions};
use crate::tensor::Tensor;

pub const SIDECAR: &str = "dataset.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format(format!("{}: {e}", path.display()))
}

pub fn write_archive(dir: &Path, ds: &CleanDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (n, m, t) = (ds.n_nodes(), ds.n_modalities(), ds.len());
    for (j, name) in ds.modalities.iter().enumerate() {
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_writer(create(&path)?);
        let mut header = vec!["t".to_string()];
        header.extend(ds.node_ids.iter().map(u32::to_string));
        w.write_record(&header).map_err(csv_err(&path))?;
        for k in 0..t {
            let mut row = vec![k.to_string()];
            row.extend((0..n).map(|i| ds.values.at3(i, j, k).to_string()));
            w.write_record(&row).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if let Some(p) = &ds.positions {
        write_positions(p, create(&dir.join("positions.csv"))?)?;
    }
    let side = dir.join(SIDECAR);
    serde_json::to_writer_pretty(create(&side)?, ds).map_err(|e| Error::Format(e.to_string()))?;
    log::info!("wrote {n}×{m}×{t} dataset to {}", dir.display());
    Ok(())
}

pub fn read_archive(dir: &Path) -> Result<CleanDataset> {
    let side = dir.join(SIDECAR);
    let mut ds: CleanDataset =
        serde_json::from_reader(open(&side)?).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
    let (n, m) = (ds.node_ids.len(), ds.modalities.len());
    if ds.mean.len() != n * m || ds.std.len() != n * m {
        return Err(Error::Format("sidecar statistics do not match node and modality counts".into()));
    }
    let mut per_modality: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
    for name in &ds.modalities {
        let path = dir.join(format!("{name}.csv"));
        let mut rdr = csv::Reader::from_reader(open(&path)?);
        let header = rdr.headers().map_err(csv_err(&path))?.clone();
        let ids: Vec<String> = ds.node_ids.iter().map(u32::to_string).collect();
        if header.len() != n + 1 || header.iter().skip(1).ne(ids.iter().map(String::as_str)) {
            return Err(Error::Format(format!("{}: columns do not match node ids", path.display())));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err(&path))?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            rows.push(vals);
        }
        per_modality.push(rows);
    }
    let t = per_modality.first().map_or(0, Vec::len);
    if per_modality.iter().any(|r| r.len() != t) {
        return Err(Error::Format("modality files differ in length".into()));
    }
    let mut values = Tensor::zeros(&[n, m, t]);
    for (j, rows) in per_modality.iter().enumerate() {
        for (k, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                values.set3(i, j, k, *v);
            }
        }
    }
    ds.values = values;
    let pos = dir.join("positions.csv");
    if ds.positions.is_none() && pos.exists() {
        ds.positions = Some(read_positions(open(&pos)?)?);
    }
    Ok(ds)
}
