use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use wsn_anomaly::data::{read_archive, write_archive, CleanDataset};
use wsn_anomaly::signal::{amplitude_spectrum, top_k_bins};
use wsn_anomaly::tensor::Tensor;

const SMALL: [&str; 12] = [
    "--set", "model.window=32", "--set", "model.step=16", "--set", "model.detect_tail=16",
    "--set", "model.epochs=10", "--set", "model.hidden=8", "--set", "synthetic.length=480",
];

fn bin(args: &[&str], extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsn-anomaly"))
        .args(args)
        .args(extra)
        .output()
        .expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args, &SMALL);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Synthetic archive, trained checkpoint and a point-injected copy.
fn pipeline(dir: &Path) -> PathBuf {
    ok(&["preprocess", "--synthetic", "--out", &p(dir, "data")]);
    ok(&["train", "--data", &p(dir, "data"), "--out", &p(dir, "run")]);
    ok(&["inject", "--data", &p(dir, "data"), "--out", &p(dir, "inj"), "--alpha", "1", "--rate", "0.01"]);
    dir.join("run/checkpoint.json")
}

fn lab_log() -> String {
    let mut s = String::new();
    for slot in 0..40 {
        for node in [1u32, 2, 3, 5, 15] {
            let x = slot as f64;
            let secs = 31 * slot;
            s.push_str(&format!(
                "2004-03-01 {:02}:{:02}:{:02}.000000 {slot} {node} {} {} 10.0 {}\n",
                secs / 3600,
                secs / 60 % 60,
                secs % 60,
                20.0 + 0.1 * x + node as f64,
                40.0 - 0.2 * x + (x * 0.7).sin(),
                2.6 + 0.001 * x
            ));
        }
    }
    s
}

#[test]
fn preprocess_lab_log_reports_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("labdata.txt");
    std::fs::write(&log, lab_log()).unwrap();
    let locs = dir.path().join("mote_locs.txt");
    std::fs::write(&locs, "1 0.5 1.0\n2 3.0 1.5\n3 6.0 2.0\n5 1.0 1.0\n15 2.0 2.0\n").unwrap();
    let out = ok(&["preprocess", "--input", &p(dir.path(), "labdata.txt"), "--positions", &p(dir.path(), "mote_locs.txt"), "--out", &p(dir.path(), "a")]);
    assert!(out.contains("excluded nodes [5, 15]"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("a/cleaning_report.json"))).unwrap();
    let excluded: Vec<u64> = report["exclusions"].as_array().unwrap().iter().map(|e| e["node_id"].as_u64().unwrap()).collect();
    assert_eq!(excluded, [5, 15]);
    assert_eq!(report["counts"]["dropped_excluded_node"], 80);
    assert_eq!(report["nodes"], serde_json::json!([1, 2, 3]));
    let ds = read_archive(&dir.path().join("a")).unwrap();
    assert_eq!(ds.positions.unwrap().len(), 3);
    assert!(dir.path().join("a/config.toml").exists());
    let inputs = read(dir.path().join("a/inputs.json"));
    assert!(inputs.contains("labdata.txt") && inputs.contains("mote_locs.txt"));
}

#[test]
fn synthetic_input_reports_no_drops() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["preprocess", "--synthetic", "--out", &p(dir.path(), "s")]);
    assert!(out.contains("dropped rows 0"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("s/cleaning_report.json"))).unwrap();
    assert_eq!(report["dropped_rows"], 0);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin(&["preprocess", "--input", &p(dir.path(), "nope.txt"), "--out", &p(dir.path(), "x")], &[]);
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[model]\nwindow = \"wide\"\n").unwrap();
    let bad = bin(&["--config", &p(dir.path(), "bad.toml"), "train"], &[]);
    assert_eq!(bad.status.code(), Some(4));
    let odd = bin(&["train", "--data", "x", "--set", "model.window=31"], &[]);
    assert_eq!(odd.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&odd.stderr).contains("odd"));
}

#[test]
fn train_echoes_default_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["train", "--data", &p(dir.path(), "none"), "--out", &p(dir.path(), "r")], &[]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("W=300 L=100 r=0.001 epochs=200"), "{text}");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_without_checkpoint_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["preprocess", "--synthetic", "--out", &p(dir.path(), "data")]);
    let out = bin(&["detect", "--data", &p(dir.path(), "data"), "--checkpoint", &p(dir.path(), "none.json"), "--out", &p(dir.path(), "d")], &SMALL);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn train_detect_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ck = pipeline(dir.path());
    let ck = ck.display().to_string();
    let d = dir.path();

    ok(&["detect", "--data", &p(d, "data"), "--checkpoint", &ck, "--out", &p(d, "clean")]);
    let scores = read(d.join("clean/scores.csv"));
    assert!(scores.starts_with("node,modality,t,score,label\n"));
    let flagged = scores.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    let cells = scores.lines().count() - 1;
    assert!(flagged * 100 <= cells, "{flagged} of {cells} clean cells flagged");

    ok(&["detect", "--data", &p(d, "inj"), "--checkpoint", &ck, "--out", &p(d, "det")]);
    let out = ok(&["evaluate", "--scores", &p(d, "det/scores.csv"), "--truth", &p(d, "det/truth.csv")]);
    assert!(out.contains("auc ") && !out.contains("undefined"), "{out}");
    let m: serde_json::Value = serde_json::from_str(&read(d.join("det/metrics.json"))).unwrap();
    for key in ["precision", "recall", "f1", "auc"] {
        assert!(m[key].is_f64(), "{key}");
    }
    for key in ["tp", "fp", "fn", "tn"] {
        assert!(m["counts"][key].is_u64(), "{key}");
    }
    assert!(m["degenerate"].is_array());
    let labels = read(d.join("inj/labels.csv"));
    assert!(labels.starts_with("node,modality,t,kind,alpha\n"));
    let positives = m["counts"]["tp"].as_u64().unwrap() + m["counts"]["fn"].as_u64().unwrap();
    assert_eq!(positives as usize, labels.lines().count() - 1);
}

#[test]
fn evaluate_fixture_counts_and_undefined_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scores = "node,modality,t,score,label\n1,h,0,0.9,1\n1,h,1,0.8,1\n1,h,2,0.1,0\n2,h,0,0.7,1\n2,h,1,0.2,0\n";
    std::fs::write(d.join("s.csv"), scores).unwrap();
    std::fs::write(d.join("t.csv"), "node,modality,t,label\n1,h,0,1\n1,h,1,0\n1,h,2,1\n2,h,0,1\n2,h,1,0\n").unwrap();
    ok(&["evaluate", "--scores", &p(d, "s.csv"), "--truth", &p(d, "t.csv"), "--out", &p(d, "e")]);
    let m: serde_json::Value = serde_json::from_str(&read(d.join("e/metrics.json"))).unwrap();
    assert_eq!(m["counts"], serde_json::json!({"tp": 2, "fp": 1, "fn": 1, "tn": 1}));
    assert_eq!(m["auc"], 0.5);

    std::fs::write(d.join("one.csv"), "node,modality,t,label\n1,h,0,0\n1,h,1,0\n1,h,2,0\n2,h,0,0\n2,h,1,0\n").unwrap();
    let out = bin(&["evaluate", "--scores", &p(d, "s.csv"), "--truth", &p(d, "one.csv"), "--out", &p(d, "u")], &[]);
    assert_eq!(out.status.code(), Some(6));
    let m: serde_json::Value = serde_json::from_str(&read(d.join("u/metrics.json"))).unwrap();
    assert!(m["auc"].is_null());
    assert!(m["degenerate"].as_array().unwrap().contains(&serde_json::json!("auc")));

    std::fs::write(d.join("short.csv"), "node,modality,t,label\n1,h,0,1\n").unwrap();
    let out = bin(&["evaluate", "--scores", &p(d, "s.csv"), "--truth", &p(d, "short.csv")], &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn inject_is_deterministic_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["preprocess", "--synthetic", "--out", &p(d, "data")]);
    for out in ["a", "b"] {
        ok(&["inject", "--data", &p(d, "data"), "--out", &p(d, out), "--alpha", "1", "--rate", "0.01", "--seed", "3"]);
    }
    assert_eq!(read(d.join("a/labels.csv")), read(d.join("b/labels.csv")));
    assert_eq!(read(d.join("a/humidity.csv")), read(d.join("b/humidity.csv")));
    let zero = bin(&["inject", "--data", &p(d, "data"), "--out", &p(d, "z"), "--alpha", "0"], &SMALL);
    assert_eq!(zero.status.code(), Some(4));

    ok(&[
        "inject", "--data", &p(d, "data"), "--out", &p(d, "c"), "--mode", "correlation",
        "--set", "inject.node=2", "--set", "inject.modality=0", "--set", "inject.partner=1",
        "--set", "inject.start=300", "--set", "inject.length=40",
    ]);
    let labels = read(d.join("c/labels.csv"));
    let rows: Vec<&str> = labels.lines().skip(1).collect();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.starts_with("3,humidity,") && r.contains(",correlation,")));
}

#[test]
fn seeded_training_repeats_bit_for_bit() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let ck = |d: &Path| std::fs::read(d.join("run/checkpoint.json")).unwrap();
    assert_eq!(ck(a.path()), ck(b.path()));
    assert_eq!(read(a.path().join("run/loss.csv")), read(b.path().join("run/loss.csv")));
    assert!(read(a.path().join("run/loss.csv")).starts_with("epoch,loss\n1,"));
    let other = tempfile::tempdir().unwrap();
    ok(&["preprocess", "--synthetic", "--out", &p(other.path(), "data")]);
    ok(&["train", "--data", &p(other.path(), "data"), "--out", &p(other.path(), "run"), "--seed", "9"]);
    assert_ne!(ck(a.path()), ck(other.path()));
    let cfg = read(other.path().join("run/config.toml"));
    assert!(cfg.contains("seed = 9"), "{cfg}");
}

fn tone_archive(dir: &Path, spike: bool) {
    let len = 128;
    let mut raw = Vec::new();
    for node in 0..2 {
        for t in 0..len {
            let mut v = (2.0 * std::f64::consts::PI * (5 + node) as f64 * t as f64 / len as f64).sin();
            if spike && node == 0 && t % 37 == 0 {
                v += 3.0;
            }
            raw.push(v);
        }
    }
    let ds = CleanDataset::from_raw(&Tensor::new(vec![2, 1, len], raw).unwrap(), vec![4, 9], vec!["temperature".into()]).unwrap();
    write_archive(dir, &ds).unwrap();
}

fn energy_outside(amps: &[f64], bins: &[usize]) -> f64 {
    amps.iter().enumerate().filter(|(k, _)| !bins.contains(k)).map(|(_, a)| a * a).sum()
}

#[test]
fn spectrum_files_and_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tone_archive(&d.join("tone"), false);
    tone_archive(&d.join("spiky"), true);
    ok(&["spectrum", "--data", &p(d, "tone"), "--series", "4:temperature", "--series", "9:0", "--out", &p(d, "s")]);
    let mut files: Vec<String> = std::fs::read_dir(d.join("s"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("spectrum_"))
        .collect();
    files.sort();
    assert_eq!(files, ["spectrum_4_temperature.csv", "spectrum_9_temperature.csv"]);
    let amps: Vec<f64> = read(d.join("s/spectrum_4_temperature.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let peak = (0..amps.len() / 2 + 1).max_by(|&a, &b| amps[a].total_cmp(&amps[b])).unwrap();
    assert_eq!(peak, 5);

    let clean = read_archive(&d.join("tone")).unwrap();
    let spiky = read_archive(&d.join("spiky")).unwrap();
    let a = amplitude_spectrum(&clean.values.data()[..128]).unwrap();
    let b = amplitude_spectrum(&spiky.values.data()[..128]).unwrap();
    let top = top_k_bins(&a, 3);
    assert!(energy_outside(&b, &top) > energy_outside(&a, &top));
}

#[test]
fn quickstart_finishes_in_budget() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t0 = Instant::now();
    let quick = [
        "--set", "model.window=64", "--set", "model.step=32", "--set", "model.detect_tail=32",
        "--set", "model.weight_decay=0.75", "--set", "model.per_instant_weights=true",
    ];
    let run = |args: &[&str]| {
        let out = bin(args, &quick);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["preprocess", "--synthetic", "--out", &p(d, "data")]);
    run(&["train", "--data", &p(d, "data"), "--out", &p(d, "run")]);
    run(&["detect", "--data", &p(d, "data"), "--checkpoint", &p(d, "run/checkpoint.json"), "--out", &p(d, "det")]);
    assert!(t0.elapsed() < Duration::from_secs(300), "{:?}", t0.elapsed());
    assert_eq!(read(d.join("run/loss.csv")).lines().count(), 201);
}
