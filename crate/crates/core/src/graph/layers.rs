//! Dynamic graph convolution with multimodal fusion.
//!
//! The `*_on` functions record onto a [`Tape`] and are what the model uses;
//! the plain-tensor functions wrap them on a throwaway tape.

use serde::{Deserialize, Serialize};

use super::AdjacencyMatrix;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Row-stochastic node affinity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialWeights {
    pub weights: Tensor,
}

/// Which graph block an encoder uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Attention-reweighted adjacency plus cross-modal fusion.
    #[default]
    Mfdgcn,
    /// Plain `σ(A·H·W)`.
    StaticGcn,
}

/// Index assignment for the cross-modal attention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionReading {
    /// Query from modality `j`, key and value from modality `i`.
    #[default]
    AsPrinted,
    /// Query from modality `i`, key and value from modality `j`.
    QueryFromTarget,
}

/// Per-modality projections of the fusion attention plus one graph weight
/// per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    pub w_o: Vec<Tensor>,
    pub w_k: Vec<Tensor>,
    pub w_v: Vec<Tensor>,
    pub layer_weights: Vec<Tensor>,
}

/// Tape handles for one set of fusion projections.
#[derive(Clone, Debug)]
pub struct FusionVars {
    pub w_o: Vec<Var>,
    pub w_k: Vec<Var>,
    pub w_v: Vec<Var>,
}

impl FusionVars {
    pub fn constants(tape: &mut Tape, p: &FusionParams) -> Self {
        let mut put = |ts: &[Tensor]| ts.iter().map(|t| tape.constant(t.clone())).collect();
        Self {
            w_o: put(&p.w_o),
            w_k: put(&p.w_k),
            w_v: put(&p.w_v),
        }
    }
}

/// `Softmax(Z·Zᵀ / √d)` for `Z: N×d`.
pub fn spatial_correlation_on(tape: &mut Tape, z: Var) -> Result<Var> {
    let d = tape.shape(z).get(1).copied().unwrap_or(0);
    if tape.shape(z).len() != 2 || d == 0 {
        return Err(Error::dim("spatial_correlation", tape.shape(z), &[0, 1]));
    }
    let gram = tape.matmul_t(z, z)?;
    let scaled = tape.scale(gram, 1.0 / (d as f64).sqrt());
    tape.softmax(scaled)
}

/// Hadamard mask of the spatial weights by the static adjacency.
pub fn adjust_adjacency_on(tape: &mut Tape, s: Var, a: Var) -> Result<Var> {
    tape.mul(s, a)
}

/// Cross-modal attention fusion of `x: N×M×T` into `N×M×T'`.
pub fn modal_fusion_on(tape: &mut Tape, x: Var, p: &FusionVars, reading: FusionReading) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 3 {
        return Err(Error::dim("modal_fusion", &shape, &[0, 0, 0]));
    }
    let m = shape[1];
    if m == 0 {
        return Err(Error::Config("modal fusion needs at least one modality".into()));
    }
    if p.w_o.len() != m || p.w_k.len() != m || p.w_v.len() != m {
        return Err(Error::dim("modal_fusion", &shape, &[p.w_o.len(), p.w_k.len(), p.w_v.len()]));
    }
    let modes: Vec<Var> = (0..m).map(|i| tape.select(x, 1, i)).collect::<Result<_>>()?;

    let mut fused = Vec::with_capacity(m);
    for i in 0..m {
        if m == 1 {
            fused.push(tape.matmul(modes[0], p.w_v[0])?);
            continue;
        }
        let d = tape.shape(p.w_o[i])[1];
        let scale = 1.0 / (d as f64).sqrt();
        let mut acc: Option<Var> = None;
        for j in (0..m).filter(|&j| j != i) {
            let (q_src, kv_src) = match reading {
                FusionReading::AsPrinted => (modes[j], modes[i]),
                FusionReading::QueryFromTarget => (modes[i], modes[j]),
            };
            let q = tape.matmul(q_src, p.w_o[i])?;
            let k = tape.matmul(kv_src, p.w_k[i])?;
            let v = tape.matmul(kv_src, p.w_v[i])?;
            let logits = tape.matmul_t(q, k)?;
            let logits = tape.scale(logits, scale);
            let attn = tape.softmax(logits)?;
            let term = tape.matmul(attn, v)?;
            acc = Some(match acc {
                Some(prev) => tape.add(prev, term)?,
                None => term,
            });
        }
        fused.push(acc.expect("m >= 2 leaves at least one partner"));
    }
    tape.stack(&fused, 1)
}

/// `σ(Ã · H · W)` with ReLU, for `H: N×F`, `Ã: N×N`, `W: F×F'`.
pub fn graph_conv_on(tape: &mut Tape, h: Var, a_tilde: Var, w: Var) -> Result<Var> {
    let agg = tape.matmul(a_tilde, h)?;
    let out = tape.matmul(agg, w)?;
    Ok(tape.relu(out))
}

/// Configuration of one MFDGCN block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphBlockConfig {
    pub mode: GraphMode,
    pub reading: FusionReading,
    /// Recompute spatial weights at every time step instead of once per
    /// window from time-averaged features.
    pub per_instant: bool,
}

/// Intermediate values of a graph block, kept for inspection.
#[derive(Clone, Debug)]
pub struct GraphBlockTrace {
    pub spatial: Option<Var>,
    pub adjusted: Var,
    pub fused: Var,
    pub output: Var,
}

/// One full graph layer on `h: N×M×T`, producing `N×M×T_out`. `layer_w` is
/// `(M·T)×(M·T_out)`; `adjacency` is a recorded `N×N` constant.
pub fn mfdgcn_block_on(
    tape: &mut Tape,
    h: Var,
    adjacency: Var,
    fusion: &FusionVars,
    layer_w: Var,
    cfg: GraphBlockConfig,
) -> Result<GraphBlockTrace> {
    let shape = tape.shape(h).to_vec();
    if shape.len() != 3 {
        return Err(Error::dim("mfdgcn", &shape, &[0, 0, 0]));
    }
    let (n, m) = (shape[0], shape[1]);
    let wshape = tape.shape(layer_w).to_vec();
    if wshape.len() != 2 || wshape[1] % m != 0 {
        return Err(Error::dim("mfdgcn", &shape, &wshape));
    }
    let t_out = wshape[1] / m;

    if cfg.mode == GraphMode::StaticGcn {
        let flat = tape.reshape(h, &[n, shape[1] * shape[2]])?;
        let out = graph_conv_on(tape, flat, adjacency, layer_w)?;
        let output = tape.reshape(out, &[n, m, t_out])?;
        return Ok(GraphBlockTrace {
            spatial: None,
            adjusted: adjacency,
            fused: h,
            output,
        });
    }

    let fused = modal_fusion_on(tape, h, fusion, cfg.reading)?;
    let t_fused = tape.shape(fused)[2];

    if !cfg.per_instant {
        let z = tape.mean_last(h)?;
        let s = spatial_correlation_on(tape, z)?;
        let a_tilde = adjust_adjacency_on(tape, s, adjacency)?;
        let flat = tape.reshape(fused, &[n, m * t_fused])?;
        let out = graph_conv_on(tape, flat, a_tilde, layer_w)?;
        let output = tape.reshape(out, &[n, m, t_out])?;
        return Ok(GraphBlockTrace {
            spatial: Some(s),
            adjusted: a_tilde,
            fused,
            output,
        });
    }

    // Per-instant weights: S_t from H[:, :, t], applied to time step t of the
    // fused features.
    let t = shape[2];
    if t_fused != t {
        return Err(Error::dim("mfdgcn per-instant", &shape, tape.shape(fused)));
    }
    let by_time = tape.permute(h, &[2, 0, 1])?;
    let gram = tape.bmm(by_time, by_time, true)?;
    let gram = tape.scale(gram, 1.0 / (m as f64).sqrt());
    let s = tape.softmax(gram)?;
    let a = tape.value(adjacency).clone();
    let tiled = Tensor::new(vec![t, n, n], a.data().repeat(t))?;
    let tiled = tape.constant(tiled);
    let a_tilde = tape.mul(s, tiled)?;
    let fused_t = tape.permute(fused, &[2, 0, 1])?;
    let agg = tape.bmm(a_tilde, fused_t, false)?;
    let agg = tape.permute(agg, &[1, 2, 0])?;
    let flat = tape.reshape(agg, &[n, m * t])?;
    let out = tape.matmul(flat, layer_w)?;
    let out = tape.relu(out);
    let output = tape.reshape(out, &[n, m, t_out])?;
    Ok(GraphBlockTrace {
        spatial: Some(s),
        adjusted: a_tilde,
        fused,
        output,
    })
}

/// Plain-tensor spatial correlation of node representations `z: N×d`.
pub fn spatial_correlation(z: &Tensor) -> Result<SpatialWeights> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let s = spatial_correlation_on(&mut tape, zv)?;
    Ok(SpatialWeights {
        weights: tape.value(s).clone(),
    })
}

/// `Ã = S ⊙ A`.
pub fn adjust_adjacency(s: &SpatialWeights, a: &AdjacencyMatrix) -> Result<Tensor> {
    s.weights.hadamard(&a.weights)
}

/// Plain-tensor modal fusion.
pub fn modal_fusion(x: &Tensor, p: &FusionParams, reading: FusionReading) -> Result<Tensor> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let vars = FusionVars::constants(&mut tape, p);
    let out = modal_fusion_on(&mut tape, xv, &vars, reading)?;
    Ok(tape.value(out).clone())
}

/// Plain-tensor graph layer `σ(Ã·H·W)` on already fused `H: N×F`.
pub fn mfdgcn_layer(h: &Tensor, a_tilde: &Tensor, w: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (hv, av, wv) = (tape.constant(h.clone()), tape.constant(a_tilde.clone()), tape.constant(w.clone()));
    let out = graph_conv_on(&mut tape, hv, av, wv)?;
    Ok(tape.value(out).clone())
}
