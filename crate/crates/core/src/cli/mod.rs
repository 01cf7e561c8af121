//! The `wsn-anomaly` command-line front end.
//!
//! Settings resolve in order: defaults, `--config` file, `--set key=value`
//! overrides, explicit flags, then the master `seed`. Every command writes
//! the resolved `config.toml` and `inputs.json` (input digests) into its
//! output directory.

mod config;
mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{InjectMode, InjectOptions, RunConfig};
pub use report::{digest_path, read_rows, write_rows, LabelRow, ScoreRow, TruthRow, LABELS};

use crate::data::{
    clean_and_align, inject_anomalies, inject_correlation_anomaly, ingest_ibrl, make_windows, read_archive,
    synth_generate, write_archive, CleanDataset, CorrelationAnomaly, LabeledWindowSet,
};
use crate::error::{Error, Result};
use crate::eval::{detect, metrics_report};
use crate::graph::{build_adjacency, read_positions, AdjacencyMatrix, NodePosition};
use crate::model::{calibrate_threshold, score_all, train_from, ModelParams};
use crate::signal::{spectrum_report, top_k_bins};
use report::{create, label_rows, open, read_labels, write_json, write_run_header};

#[derive(Debug, Parser)]
#[command(name = "wsn-anomaly", version, about = "Multimodal sensor-network anomaly detection")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set model.window=64`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed; overrides every component seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Increase log verbosity.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw lab log, or generate synthetic data, into an archive.
    Preprocess {
        /// Raw lab log.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Node positions, `node_id,x,y` CSV or whitespace `id x y` lines.
        #[arg(long)]
        positions: Option<PathBuf>,
        /// Generate the `[synthetic]` dataset instead of reading a log.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on the leading windows of an archive and calibrate the threshold.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the test windows of an archive with a checkpoint.
    Detect {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score every window, training ones included.
        #[arg(long)]
        all: bool,
    },
    /// Compute metrics from a scores CSV and a truth CSV.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inject labelled anomalies into the test part of an archive.
    Inject {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Write amplitude spectra of selected series.
    Spectrum {
        #[arg(long)]
        data: Option<PathBuf>,
        /// `node_id:modality` (name or index); repeatable; all series if omitted.
        #[arg(long = "series")]
        series: Vec<String>,
        /// First timeline index.
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Number of samples; to the end if omitted.
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Point,
    Correlation,
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_overrides(&cli.overrides)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match cli.command {
        Command::Preprocess {
            input,
            positions,
            synthetic,
            out,
        } => {
            set(&mut cfg.data, input);
            set(&mut cfg.out, out);
            preprocess(&cfg.resolve()?, positions.as_deref(), synthetic)
        }
        Command::Train { data, out } => {
            set(&mut cfg.data, data);
            set(&mut cfg.out, out);
            train_cmd(&cfg.resolve()?)
        }
        Command::Detect {
            data,
            checkpoint,
            out,
            all,
        } => {
            set(&mut cfg.data, data);
            set(&mut cfg.checkpoint, checkpoint);
            set(&mut cfg.out, out);
            detect_cmd(&cfg.resolve()?, all)
        }
        Command::Evaluate { scores, truth, out } => {
            set(&mut cfg.out, out);
            evaluate_cmd(&cfg.resolve()?, &scores, &truth)
        }
        Command::Inject {
            data,
            out,
            mode,
            alpha,
            rate,
        } => {
            set(&mut cfg.data, data);
            set(&mut cfg.out, out);
            if let Some(m) = mode {
                cfg.inject.mode = match m {
                    ModeArg::Point => InjectMode::Point,
                    ModeArg::Correlation => InjectMode::Correlation,
                };
            }
            set(&mut cfg.inject.alpha, alpha);
            set(&mut cfg.inject.rate, rate);
            inject_cmd(&cfg.resolve()?)
        }
        Command::Spectrum {
            data,
            series,
            start,
            len,
            out,
        } => {
            set(&mut cfg.data, data);
            set(&mut cfg.out, out);
            spectrum_cmd(&cfg.resolve()?, &series, start, len)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<impl Into<T>>) {
    if let Some(v) = value {
        *slot = v.into();
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} given (flag or config)")))
}

fn header(cfg: &RunConfig, dir: &Path, inputs: &[&Path]) -> Result<()> {
    write_run_header(dir, &cfg.to_toml()?, inputs)
}

/// Reads `node_id,x,y` CSV, falling back to whitespace-separated `id x y`.
fn load_positions(path: &Path) -> Result<Vec<NodePosition>> {
    if let Ok(p) = read_positions(open(path)?) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let bad = || Error::Format(format!("{}: bad position line {l:?}", path.display()));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(NodePosition {
                node_id: f[0].parse().map_err(|_| bad())?,
                x: f[1].parse().map_err(|_| bad())?,
                y: f[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn preprocess(cfg: &RunConfig, positions: Option<&Path>, synthetic: bool) -> Result<()> {
    let out = required(&cfg.out, "output directory")?;
    let mut inputs = Vec::new();
    let mut ds = if synthetic {
        synth_generate(&cfg.synthetic)?.dataset
    } else {
        let input = required(&cfg.data, "input log")?;
        inputs.push(input);
        let log = ingest_ibrl(open(input)?)?;
        clean_and_align(&log, &cfg.cleaning)?
    };
    if let Some(p) = positions {
        inputs.push(p);
        let all = load_positions(p)?;
        let kept = ds
            .node_ids
            .iter()
            .map(|id| {
                all.iter()
                    .find(|q| q.node_id == *id)
                    .cloned()
                    .ok_or_else(|| Error::Format(format!("no position for node {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ds.positions = Some(kept);
    }
    write_archive(out, &ds)?;
    let report = serde_json::json!({
        "nodes": ds.node_ids,
        "modalities": ds.modalities,
        "length": ds.len(),
        "counts": ds.counts,
        "dropped_rows": ds.counts.dropped_rows(),
        "exclusions": ds.exclusions,
        "degenerate": ds.degenerate,
    });
    write_json(&out.join("cleaning_report.json"), &report)?;
    header(cfg, out, &inputs)?;
    let excluded: Vec<String> = ds.exclusions.iter().map(|e| e.node_id.to_string()).collect();
    println!(
        "{} nodes × {} modalities × {} samples; dropped rows {}; excluded nodes [{}]",
        ds.n_nodes(),
        ds.n_modalities(),
        ds.len(),
        ds.counts.dropped_rows(),
        excluded.join(", ")
    );
    Ok(())
}

fn adjacency_for(ds: &CleanDataset, k: usize) -> Result<AdjacencyMatrix> {
    match &ds.positions {
        Some(p) if ds.n_nodes() > 1 => build_adjacency(p, k.min(ds.n_nodes() - 1)),
        _ => {
            log::warn!("no node positions; using the complete graph");
            Ok(AdjacencyMatrix::complete(ds.node_ids.clone()))
        }
    }
}

fn windows_of(ds: &CleanDataset, cfg: &crate::model::ModelConfig) -> Result<LabeledWindowSet> {
    make_windows(&ds.values, cfg.window, cfg.step, cfg.detect_tail)
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data archive")?;
    let out = required(&cfg.out, "output directory")?;
    let m = &cfg.model;
    println!(
        "W={} L={} r={} epochs={} seed={}",
        m.window, m.step, m.learning_rate, m.epochs, m.seed
    );
    let ds = read_archive(data)?;
    let mut ws = windows_of(&ds, m)?;
    ws.labels = read_labels(data, &ds)?;
    let (train_end, _) = cfg.split(ws.len())?;
    let train_set = ws.subset(0..train_end)?;
    if !train_set.labels.is_empty() {
        log::warn!("{} labelled cells fall inside the training windows", train_set.labels.len());
    }
    let windows = train_set.windows();
    let params = ModelParams::init(m, ds.n_modalities(), adjacency_for(&ds, m.neighbors)?)?;
    log::info!("training {} parameters on {} windows", params.parameter_count(), windows.len());
    let (mut params, log) = train_from(params, &windows, |e, l| log::info!("epoch {e}: loss {l:.6}"))?;
    let tau = calibrate_threshold(&score_all(&windows, &params)?)?;
    params.threshold = Some(tau);
    let ck = cfg.checkpoint.clone().unwrap_or_else(|| out.join("checkpoint.json"));
    params.write_checkpoint(create(&ck)?)?;
    log.write_csv(create(&out.join("loss.csv"))?)?;
    header(cfg, out, &[data])?;
    println!(
        "trained on {} windows; final loss {:.6}; threshold {tau}; checkpoint {} sha256 {}",
        windows.len(),
        log.epoch_losses.last().copied().unwrap_or(f64::NAN),
        ck.display(),
        params.digest()?
    );
    Ok(())
}

fn detect_cmd(cfg: &RunConfig, all: bool) -> Result<()> {
    let data = required(&cfg.data, "data archive")?;
    let out = required(&cfg.out, "output directory")?;
    let ck = required(&cfg.checkpoint, "checkpoint")?;
    if !ck.is_file() {
        return Err(Error::Contract(format!("checkpoint {} does not exist", ck.display())));
    }
    let params = ModelParams::read_checkpoint(open(ck)?)?;
    if !params.trained || params.threshold.is_none() {
        return Err(Error::Contract("checkpoint is not trained and calibrated".into()));
    }
    let ds = read_archive(data)?;
    if ds.node_ids != params.adjacency.node_ids || ds.n_modalities() != params.n_modalities {
        return Err(Error::Contract("archive nodes or modalities differ from the checkpoint's".into()));
    }
    let mut ws = windows_of(&ds, &params.config)?;
    ws.labels = read_labels(data, &ds)?;
    let split_cfg = RunConfig {
        model: params.config.clone(),
        ..cfg.clone()
    };
    let first = if all { 0 } else { split_cfg.split(ws.len())?.1 };
    let test = ws.subset(first..ws.len())?;
    let t0 = ws.start(first);
    let det = detect(&params, &test)?;
    let (mut scores, mut truth) = (Vec::new(), Vec::new());
    for (i, grid) in det.scores.iter().enumerate() {
        let tail = test.tail_range(i);
        let (pred, lab) = (&det.predictions[i], &det.truth[i]);
        for (k, &s) in grid.scores.data().iter().enumerate() {
            let series = k / test.detect_tail;
            let t = t0 + tail.start + k % test.detect_tail;
            let node = ds.node_ids[series / ds.n_modalities()];
            let modality = ds.modalities[series % ds.n_modalities()].clone();
            scores.push(ScoreRow {
                node,
                modality: modality.clone(),
                t,
                score: s,
                label: pred.labels[k],
            });
            truth.push(TruthRow {
                node,
                modality,
                t,
                label: lab.labels[k],
            });
        }
    }
    write_rows(&out.join("scores.csv"), &scores)?;
    write_rows(&out.join("truth.csv"), &truth)?;
    let flagged = scores.iter().filter(|r| r.label == 1).count();
    write_json(
        &out.join("threshold.json"),
        &serde_json::json!({
            "threshold": params.threshold,
            "first_window": first,
            "windows": det.scores.len(),
            "cells": scores.len(),
            "flagged": flagged,
        }),
    )?;
    header(cfg, out, &[data, ck])?;
    println!(
        "threshold {}; flagged {flagged} of {} cells in {} windows",
        params.threshold.unwrap_or(f64::NAN),
        scores.len(),
        det.scores.len()
    );
    Ok(())
}

fn evaluate_cmd(cfg: &RunConfig, scores_path: &Path, truth_path: &Path) -> Result<()> {
    let scores: Vec<ScoreRow> = read_rows(scores_path)?;
    let truth: Vec<TruthRow> = read_rows(truth_path)?;
    if scores.len() != truth.len() {
        return Err(Error::Format(format!(
            "{} score rows vs {} truth rows",
            scores.len(),
            truth.len()
        )));
    }
    for (i, (s, t)) in scores.iter().zip(&truth).enumerate() {
        if (s.node, &s.modality, s.t) != (t.node, &t.modality, t.t) {
            return Err(Error::Format(format!("row {} keys differ between scores and truth", i + 1)));
        }
        if s.label > 1 || t.label > 1 {
            return Err(Error::Format(format!("row {}: labels must be 0 or 1", i + 1)));
        }
    }
    let s: Vec<f64> = scores.iter().map(|r| r.score).collect();
    let p: Vec<u8> = scores.iter().map(|r| r.label).collect();
    let t: Vec<u8> = truth.iter().map(|r| r.label).collect();
    let report = metrics_report(&s, &p, &t)?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| scores_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    write_json(&out.join("metrics.json"), &report)?;
    header(cfg, &out, &[scores_path, truth_path])?;
    let auc = report.auc.map_or("undefined".to_string(), |a| format!("{a:.6}"));
    println!(
        "precision {:.6} recall {:.6} f1 {:.6} auc {auc} (tp {} fp {} fn {} tn {})",
        report.precision,
        report.recall,
        report.f1,
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_,
        report.counts.tn
    );
    match report.auc {
        Some(_) => Ok(()),
        None => Err(Error::UndefinedMetric("truth holds a single class; AUC undefined".into())),
    }
}

fn inject_cmd(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data archive")?;
    let out = required(&cfg.out, "output directory")?;
    let mut ds = read_archive(data)?;
    let mut ws = windows_of(&ds, &cfg.model)?;
    ws.labels = read_labels(data, &ds)?;
    let before = ws.labels.len();
    let o = &cfg.inject;
    let injected = match o.mode {
        InjectMode::Point => {
            let (_, first) = cfg.split(ws.len())?;
            let t0 = ws.start(first);
            let test = inject_anomalies(&ws.subset(first..ws.len())?, o.alpha, o.rate, o.seed)?;
            let mut full = ws.clone();
            let (t_len, sub_len) = (ws.timeline_len(), test.timeline_len());
            for (dst, src) in full
                .timeline
                .data_mut()
                .chunks_mut(t_len)
                .zip(test.timeline.data().chunks(sub_len))
            {
                dst[t0..t0 + sub_len].copy_from_slice(src);
            }
            for (c, p) in &test.labels {
                full.labels.insert(crate::data::Cell { t: c.t + t0, ..*c }, *p);
            }
            full
        }
        InjectMode::Correlation => {
            if o.length == 0 {
                return Err(Error::Config("correlation anomaly needs inject.length > 0".into()));
            }
            let spec = CorrelationAnomaly {
                node: o.node,
                modality: o.modality,
                partner: o.partner,
                span: o.start..o.start + o.length,
            };
            inject_correlation_anomaly(&ws, &spec)?
        }
    };
    ds.values = injected.timeline.clone();
    write_archive(out, &ds)?;
    write_rows(&out.join(LABELS), &label_rows(&ds, &injected.labels))?;
    header(cfg, out, &[data])?;
    println!(
        "injected {} cells ({:?}); {} labelled cells in total",
        injected.labels.len() - before,
        o.mode,
        injected.labels.len()
    );
    Ok(())
}

fn parse_series(ds: &CleanDataset, spec: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("series {spec:?} is not node_id:modality"));
    let (node, modality) = spec.split_once(':').ok_or_else(bad)?;
    let id: u32 = node.trim().parse().map_err(|_| bad())?;
    let n = ds
        .node_ids
        .iter()
        .position(|&x| x == id)
        .ok_or_else(|| Error::Config(format!("unknown node {id}")))?;
    let m = match ds.modalities.iter().position(|x| x == modality.trim()) {
        Some(m) => m,
        None => modality
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&m| m < ds.n_modalities())
            .ok_or_else(|| Error::Config(format!("unknown modality {modality}")))?,
    };
    Ok((n, m))
}

fn spectrum_cmd(cfg: &RunConfig, series: &[String], start: usize, len: Option<usize>) -> Result<()> {
    let data = required(&cfg.data, "data archive")?;
    let out = required(&cfg.out, "output directory")?;
    let ds = read_archive(data)?;
    let t = ds.len();
    let end = len.map_or(t, |l| start + l);
    if start >= end || end > t {
        return Err(Error::Config(format!("range {start}..{end} outside timeline 0..{t}")));
    }
    let picks: Vec<(usize, usize)> = if series.is_empty() {
        (0..ds.n_nodes())
            .flat_map(|n| (0..ds.n_modalities()).map(move |m| (n, m)))
            .collect()
    } else {
        series.iter().map(|s| parse_series(&ds, s)).collect::<Result<_>>()?
    };
    for (n, m) in picks {
        let base = (n * ds.n_modalities() + m) * t;
        let x = &ds.values.data()[base + start..base + end];
        let name = format!("spectrum_{}_{}.csv", ds.node_ids[n], ds.modalities[m]);
        let amps = spectrum_report(x, create(&out.join(&name))?)?;
        println!("{name}: top bins {:?}", top_k_bins(&amps, 3));
    }
    header(cfg, out, &[data])?;
    Ok(())
}
