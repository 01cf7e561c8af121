//! Literal-loop oracles and gradient-check drivers shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsn_anomaly::graph::{AdjacencyMatrix, FusionParams, FusionReading, NodePosition};
use wsn_anomaly::model::{decompose, forward_on, loss_mse, mse_on, reconstruct, Bound, ModelConfig, ModelParams, Transforms};
use wsn_anomaly::tensor::check::{max_relative_error, numeric_gradient};
use wsn_anomaly::tensor::{Tape, Tensor, Var};
use wsn_anomaly::Result;

pub const GRAD_H: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, r)
}

pub fn softmax_row(v: &[f64]) -> Vec<f64> {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn mm(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|p| a[i][p] * b[p][j]).sum()).collect())
        .collect()
}

pub fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    let c = t.shape()[1];
    t.data().chunks(c).map(<[f64]>::to_vec).collect()
}

/// Row softmax of `Z·Zᵀ/√d` for node representations `z: N×d`.
pub fn oracle_spatial(z: &Tensor) -> Vec<Vec<f64>> {
    let (n, d) = (z.shape()[0], z.shape()[1]);
    (0..n)
        .map(|i| {
            let logits: Vec<f64> = (0..n)
                .map(|j| (0..d).map(|k| z.at2(i, k) * z.at2(j, k)).sum::<f64>() / (d as f64).sqrt())
                .collect();
            softmax_row(&logits)
        })
        .collect()
}

/// Cross-modal attention over nodes, summed over partner modalities.
pub fn oracle_fusion(x: &Tensor, p: &FusionParams, reading: FusionReading) -> Tensor {
    let (n, m, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let modality = |i: usize| -> Vec<Vec<f64>> { (0..n).map(|a| (0..t).map(|b| x.at3(a, i, b)).collect()).collect() };
    let t_out = p.w_v[0].shape()[1];
    let mut out = Tensor::zeros(&[n, m, t_out]);
    for i in 0..m {
        let d = p.w_o[i].shape()[1];
        let mut acc = vec![vec![0.0; t_out]; n];
        for j in (0..m).filter(|&j| j != i) {
            let (qs, kvs) = match reading {
                FusionReading::AsPrinted => (modality(j), modality(i)),
                FusionReading::QueryFromTarget => (modality(i), modality(j)),
            };
            let q = mm(&qs, &rows_of(&p.w_o[i]));
            let k = mm(&kvs, &rows_of(&p.w_k[i]));
            let v = mm(&kvs, &rows_of(&p.w_v[i]));
            for a in 0..n {
                let logits: Vec<f64> = (0..n)
                    .map(|b| (0..d).map(|c| q[a][c] * k[b][c]).sum::<f64>() / (d as f64).sqrt())
                    .collect();
                let w = softmax_row(&logits);
                for b in 0..n {
                    for c in 0..t_out {
                        acc[a][c] += w[b] * v[b][c];
                    }
                }
            }
        }
        for a in 0..n {
            for c in 0..t_out {
                out.set3(a, i, c, acc[a][c]);
            }
        }
    }
    out
}

pub fn random_fusion(m: usize, t: usize, d: usize, r: &mut ChaCha8Rng) -> FusionParams {
    FusionParams {
        w_o: (0..m).map(|_| Tensor::uniform(&[t, d], 0.8, r)).collect(),
        w_k: (0..m).map(|_| Tensor::uniform(&[t, d], 0.8, r)).collect(),
        w_v: (0..m).map(|_| Tensor::uniform(&[t, t], 0.8, r)).collect(),
        layer_weights: vec![],
    }
}

/// `relu(Ã·H·W)` by explicit sums.
pub fn oracle_graph_layer(h: &Tensor, a: &Tensor, w: &Tensor) -> Vec<Vec<f64>> {
    let (n, f, g) = (h.shape()[0], h.shape()[1], w.shape()[1]);
    (0..n)
        .map(|i| {
            (0..g)
                .map(|o| {
                    let mut s = 0.0;
                    for k in 0..n {
                        for c in 0..f {
                            s += a.at2(i, k) * h.at2(k, c) * w.at2(c, o);
                        }
                    }
                    s.max(0.0)
                })
                .collect()
        })
        .collect()
}

pub fn random_positions(n: usize, r: &mut ChaCha8Rng) -> Vec<NodePosition> {
    (0..n)
        .map(|i| NodePosition {
            node_id: i as u32 + 1,
            x: r.random_range(0.0..10.0),
            y: r.random_range(0.0..10.0),
        })
        .collect()
}

/// A tape primitive under test: builds an output from parameter vars.
pub struct Primitive {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: fn(&mut Tape, &[Var]) -> Result<Var>,
}

pub fn primitives() -> Vec<Primitive> {
    let p = |name, shapes: &[&[usize]], build| Primitive {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        build,
    };
    vec![
        p("matmul", &[&[3, 4], &[4, 2]], |t, v| t.matmul(v[0], v[1])),
        p("matmul_t", &[&[3, 4], &[5, 4]], |t, v| t.matmul_t(v[0], v[1])),
        p("bmm", &[&[2, 3, 4], &[2, 4, 3]], |t, v| t.bmm(v[0], v[1], false)),
        p("bmm_transposed", &[&[2, 3, 4], &[2, 5, 4]], |t, v| t.bmm(v[0], v[1], true)),
        p("add", &[&[3, 4], &[3, 4]], |t, v| t.add(v[0], v[1])),
        p("sub", &[&[3, 4], &[3, 4]], |t, v| t.sub(v[0], v[1])),
        p("mul", &[&[3, 4], &[3, 4]], |t, v| t.mul(v[0], v[1])),
        p("add_bias", &[&[2, 3, 4], &[4]], |t, v| t.add_bias(v[0], v[1])),
        p("scale", &[&[3, 4]], |t, v| Ok(t.scale(v[0], -1.7))),
        p("relu", &[&[4, 5]], |t, v| Ok(t.relu(v[0]))),
        p("square", &[&[4, 5]], |t, v| Ok(t.square(v[0]))),
        p("modulus", &[&[3, 4], &[3, 4]], |t, v| t.modulus(v[0], v[1])),
        p("softmax", &[&[3, 5]], |t, v| t.softmax(v[0])),
        p("permute", &[&[2, 3, 4]], |t, v| t.permute(v[0], &[2, 0, 1])),
        p("reshape", &[&[2, 3, 4]], |t, v| t.reshape(v[0], &[6, 4])),
        p("select", &[&[2, 3, 4]], |t, v| t.select(v[0], 1, 2)),
        p("stack", &[&[3, 4], &[3, 4]], |t, v| t.stack(&[v[0], v[1]], 1)),
        p("mean_last", &[&[3, 4]], |t, v| t.mean_last(v[0])),
        p("mean", &[&[3, 4]], |t, v| Ok(t.mean(v[0]))),
    ]
}

/// Largest relative gradient error of `mean(out ⊙ R)` for a fixed random `R`.
pub fn check_primitive(p: &Primitive, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let params: Vec<Tensor> = p.shapes.iter().map(|s| Tensor::uniform(s, 2.0, &mut r)).collect();
    let run = |tensors: &[Tensor], weights: Option<&Tensor>| -> Result<(Tape, Var, Tensor)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().enumerate().map(|(i, t)| tape.param(i, t.clone())).collect();
        let out = (p.build)(&mut tape, &vars)?;
        let w = match weights {
            Some(w) => w.clone(),
            None => Tensor::uniform(tape.shape(out), 1.0, &mut rng(seed ^ 0xabcd)),
        };
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv)?;
        let loss = tape.mean(prod);
        Ok((tape, loss, w))
    };
    let (tape, loss, w) = run(&params, None)?;
    let shapes: Vec<&[usize]> = p.shapes.iter().map(Vec::as_slice).collect();
    let grads = tape.backward(loss)?.params(&shapes);
    let f = |ts: &[Tensor]| {
        let (tape, loss, _) = run(ts, Some(&w)).expect("forward");
        tape.value(loss).data()[0]
    };
    let mut worst: f64 = 0.0;
    for slot in 0..params.len() {
        worst = worst.max(max_relative_error(&grads[slot], &numeric_gradient(f, &params, slot, GRAD_H)));
    }
    Ok(worst)
}

/// Configuration of the small end-to-end gradient instance.
pub fn small_config(window: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        window,
        step: window / 2,
        detect_tail: window / 2,
        hidden: 8,
        attention_dim: 4,
        fusion_dim: 4,
        epochs: 5,
        seed,
        per_instant_weights: seed % 2 == 1,
        ..Default::default()
    }
}

/// Largest relative error, over every parameter, of the reconstruction
/// loss gradient on random parameters and data. Returns the worst slot name.
pub fn check_end_to_end(n: usize, m: usize, w: usize, seed: u64) -> Result<(f64, String)> {
    let cfg = small_config(w, seed);
    let mut r = rng(1000 + seed);
    let adj = wsn_anomaly::graph::build_adjacency(&random_positions(n, &mut r), 2.min(n - 1))?;
    let mut p = ModelParams::init(&cfg, m, adj)?;
    for t in p.tensors_mut() {
        *t = Tensor::uniform(t.shape(), 0.5, &mut r);
    }
    let x = random(&[n, m, w], &mut r);
    let tr = Transforms::new(&cfg)?;
    let parts = decompose(&x, &cfg)?;
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &p, true);
    let f = forward_on(&mut tape, &b, &tr, &parts)?;
    let xv = tape.constant(x.clone());
    let loss = mse_on(&mut tape, xv, f.reconstruction)?;
    let shapes: Vec<&[usize]> = p.tensors().iter().map(Tensor::shape).collect();
    let grads = tape.backward(loss)?.params(&shapes);
    let loss_of = |ts: &[Tensor]| {
        let mut q = p.clone();
        q.tensors_mut().clone_from_slice(ts);
        loss_mse(&x, &reconstruct(&x, &q).expect("forward")).expect("loss")
    };
    let mut worst = (0.0, String::new());
    for slot in 0..p.tensors().len() {
        let e = max_relative_error(&grads[slot], &numeric_gradient(loss_of, p.tensors(), slot, GRAD_H));
        if e >= worst.0 {
            worst = (e, p.names()[slot].clone());
        }
    }
    Ok(worst)
}

pub fn complete(n: usize) -> AdjacencyMatrix {
    AdjacencyMatrix::complete((1..=n as u32).collect())
}
