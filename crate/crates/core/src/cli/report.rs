use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{CleanDataset, Cell, Provenance};
use crate::error::{Error, Result};

pub const LABELS: &str = "labels.csv";

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format(format!("{}: {e}", path.display()))
}

/// SHA-256 of a file, or of every file under a directory in path order.
pub fn digest_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut files = Vec::new();
    collect_files(path, &mut files)?;
    for f in files {
        if path.is_dir() {
            h.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
        }
        let mut buf = Vec::new();
        open(&f)?.read_to_end(&mut buf).map_err(|e| Error::io(&f, e))?;
        h.update(&buf);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(path, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    for e in entries {
        collect_files(&e, out)?;
    }
    Ok(())
}

/// Writes the resolved config and the digests of `inputs` into `dir`.
pub fn write_run_header(dir: &Path, config_toml: &str, inputs: &[&Path]) -> Result<()> {
    let cfg_path = dir.join("config.toml");
    let mut w = create(&cfg_path)?;
    w.write_all(config_toml.as_bytes()).map_err(|e| Error::io(&cfg_path, e))?;
    w.flush().map_err(|e| Error::io(&cfg_path, e))?;
    let mut digests = BTreeMap::new();
    for p in inputs {
        digests.insert(p.display().to_string(), digest_path(p)?);
    }
    write_json(&dir.join("inputs.json"), &digests)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// One scored cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub node: u32,
    pub modality: String,
    pub t: usize,
    pub score: f64,
    pub label: u8,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

/// One labelled cell of the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub node: u32,
    pub modality: String,
    pub t: usize,
    pub label: u8,
}

/// One row of an archive's label sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub node: u32,
    pub modality: String,
    pub t: usize,
    pub kind: String,
    pub alpha: Option<f64>,
}

pub fn label_rows(ds: &CleanDataset, labels: &BTreeMap<Cell, Provenance>) -> Vec<LabelRow> {
    labels
        .iter()
        .map(|(c, p)| {
            let (kind, alpha) = match p {
                Provenance::Given => ("given", None),
                Provenance::Injected { alpha } => ("injected", Some(*alpha)),
                Provenance::Correlation => ("correlation", None),
            };
            LabelRow {
                node: ds.node_ids[c.node],
                modality: ds.modalities[c.modality].clone(),
                t: c.t,
                kind: kind.into(),
                alpha,
            }
        })
        .collect()
}

/// Labels stored next to an archive, if any.
pub fn read_labels(dir: &Path, ds: &CleanDataset) -> Result<BTreeMap<Cell, Provenance>> {
    let path = dir.join(LABELS);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut out = BTreeMap::new();
    for r in read_rows::<LabelRow>(&path)? {
        let node = ds.node_ids.iter().position(|&n| n == r.node);
        let modality = ds.modalities.iter().position(|m| *m == r.modality);
        let (Some(node), Some(modality)) = (node, modality) else {
            return Err(Error::Format(format!("{}: unknown series {}/{}", path.display(), r.node, r.modality)));
        };
        if r.t >= ds.len() {
            return Err(Error::Format(format!("{}: t={} beyond the timeline", path.display(), r.t)));
        }
        let p = match (r.kind.as_str(), r.alpha) {
            ("given", _) => Provenance::Given,
            ("injected", Some(alpha)) => Provenance::Injected { alpha },
            ("correlation", _) => Provenance::Correlation,
            (k, _) => return Err(Error::Format(format!("{}: unknown label kind {k}", path.display()))),
        };
        out.insert(Cell { node, modality, t: r.t }, p);
    }
    Ok(out)
}
