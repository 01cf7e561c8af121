//! Forward pass of the autoencoder, recorded on a [`Tape`].

use super::{Decomposition, ModelConfig, ModelParams, SeasonalAttention};
use crate::error::{Error, Result};
use crate::graph::{mfdgcn_block_on, FusionVars, GraphBlockConfig};
use crate::signal::{dft_matrices, dwt_level1, synthesis_matrices, DecomposedSeries, WaveletFilterPair};
use crate::tensor::{Tape, Tensor, Var};

/// Splits a window `N×M×W` into trend and seasonal parts.
pub fn decompose(x: &Tensor, cfg: &ModelConfig) -> Result<DecomposedSeries> {
    match cfg.decomposition {
        Decomposition::Dwt => dwt_level1(x, &WaveletFilterPair::haar()),
        Decomposition::MovingAverage => moving_average_split(x, cfg.ma_window),
    }
}

/// Centered moving average of odd length `window` with edge replication as
/// the trend; the remainder as the seasonal part.
pub fn moving_average_split(x: &Tensor, window: usize) -> Result<DecomposedSeries> {
    let w = x.last_dim();
    if w == 0 || window % 2 == 0 {
        return Err(Error::Config(format!("moving average needs odd window and nonempty series, got {window}")));
    }
    let r = (window / 2) as isize;
    let mut trend = x.clone();
    for (src, dst) in x.data().chunks(w).zip(trend.data_mut().chunks_mut(w)) {
        for (t, d) in dst.iter_mut().enumerate() {
            let sum: f64 = (-r..=r).map(|k| src[(t as isize + k).clamp(0, w as isize - 1) as usize]).sum();
            *d = sum / window as f64;
        }
    }
    let seasonal = x.sub(&trend)?;
    Ok(DecomposedSeries {
        trend,
        seasonal,
        original_length: w,
    })
}

/// Fixed matrices that depend only on the configuration.
#[derive(Clone, Debug)]
pub struct Transforms {
    dft: (Tensor, Tensor),
    synthesis: Option<(Tensor, Tensor)>,
}

impl Transforms {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.component_len();
        let synthesis = match cfg.decomposition {
            Decomposition::Dwt => Some(synthesis_matrices(&WaveletFilterPair::haar(), c)?),
            Decomposition::MovingAverage => None,
        };
        Ok(Self {
            dft: dft_matrices(c),
            synthesis,
        })
    }
}

/// Parameters of a [`ModelParams`] recorded on a tape.
pub struct Bound<'a> {
    pub params: &'a ModelParams,
    pub vars: Vec<Var>,
    adjacency: Var,
}

impl<'a> Bound<'a> {
    /// Records every parameter, as trainable slots or as constants.
    pub fn new(tape: &mut Tape, params: &'a ModelParams, trainable: bool) -> Self {
        let vars = params
            .tensors()
            .iter()
            .enumerate()
            .map(|(i, t)| if trainable { tape.param(i, t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        let adjacency = tape.constant(params.adjacency.weights.clone());
        Self { params, vars, adjacency }
    }

    pub fn var(&self, name: &str) -> Var {
        self.vars[self.params.slot(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    fn fusion(&self, enc: &str) -> FusionVars {
        let m = self.params.n_modalities;
        let pick = |kind: &str| (0..m).map(|i| self.var(&format!("{enc}.fusion.{kind}.{i}"))).collect();
        FusionVars {
            w_o: pick("w_o"),
            w_k: pick("w_k"),
            w_v: pick("w_v"),
        }
    }

    fn graph_cfg(&self) -> GraphBlockConfig {
        let c = &self.params.config;
        GraphBlockConfig {
            mode: c.graph,
            reading: c.fusion_reading,
            per_instant: c.per_instant_weights,
        }
    }

    fn graph_stack(&self, tape: &mut Tape, enc: &str, mut h: Var) -> Result<Var> {
        let fusion = self.fusion(enc);
        for l in 0..self.params.config.depth {
            let w = self.var(&format!("{enc}.graph.{l}"));
            h = mfdgcn_block_on(tape, h, self.adjacency, &fusion, w, self.graph_cfg())?.output;
        }
        Ok(h)
    }
}

fn dims3(tape: &Tape, x: Var, op: &'static str) -> Result<(usize, usize, usize)> {
    match *tape.shape(x) {
        [n, m, t] => Ok((n, m, t)),
        ref s => Err(Error::dim(op, s, &[0, 0, 0])),
    }
}

/// Right-multiplies the last axis of a 3-D value by a matrix.
fn matmul_last(tape: &mut Tape, x: Var, w: Var) -> Result<Var> {
    let (a, b, c) = dims3(tape, x, "matmul_last")?;
    let flat = tape.reshape(x, &[a * b, c])?;
    let y = tape.matmul(flat, w)?;
    let out = tape.shape(y)[1];
    tape.reshape(y, &[a, b, out])
}

/// Trend path: the MLP along time, then the graph layers.
pub struct TrendTrace {
    pub mlp: Var,
    pub output: Var,
}

pub fn trend_encode_on(tape: &mut Tape, b: &Bound, x: Var) -> Result<TrendTrace> {
    let (n, m, c) = dims3(tape, x, "trend_encode")?;
    if m != b.params.n_modalities || c != b.params.config.component_len() {
        return Err(Error::dim(
            "trend_encode",
            &[n, m, c],
            &[n, b.params.n_modalities, b.params.config.component_len()],
        ));
    }
    let flat = tape.reshape(x, &[n * m, c])?;
    let h = tape.matmul(flat, b.var("trend.mlp.w1"))?;
    let h = tape.add_bias(h, b.var("trend.mlp.b1"))?;
    let h = tape.relu(h);
    let o = tape.matmul(h, b.var("trend.mlp.w2"))?;
    let o = tape.add_bias(o, b.var("trend.mlp.b2"))?;
    let mlp = tape.reshape(o, &[n, m, c])?;
    let output = b.graph_stack(tape, "trend", mlp)?;
    Ok(TrendTrace { mlp, output })
}

/// Frequency-domain attention intermediates.
pub struct FdamTrace {
    /// Row-stochastic attention over frequency bins, `N×F×F`.
    pub attention: Var,
    pub output: Var,
    /// Largest imaginary part dropped by the inverse transform.
    pub imag_residue: f64,
}

/// Attention whose tokens are the frequency bins of each node's window and
/// whose features are the modalities. With [`SeasonalAttention::Time`] the
/// transforms are skipped and the imaginary parts are zero.
pub fn fdam_on(tape: &mut Tape, b: &Bound, tr: &Transforms, x: Var) -> Result<FdamTrace> {
    let (n, m, c) = dims3(tape, x, "fdam")?;
    let freq = b.params.config.seasonal_attention == SeasonalAttention::Frequency;
    let flat = tape.reshape(x, &[n * m, c])?;
    let (cos, sin) = (tape.constant(tr.dft.0.clone()), tape.constant(tr.dft.1.clone()));
    let (re, im) = if freq {
        let re = tape.matmul(flat, cos)?;
        let s = tape.matmul(flat, sin)?;
        (re, tape.scale(s, -1.0))
    } else {
        (flat, tape.constant(Tensor::zeros(&[n * m, c])))
    };
    let to_tokens = |tape: &mut Tape, v: Var| -> Result<Var> {
        let v = tape.reshape(v, &[n, m, c])?;
        tape.permute(v, &[0, 2, 1])
    };
    let (re, im) = (to_tokens(tape, re)?, to_tokens(tape, im)?);
    let proj = |tape: &mut Tape, name: &str| -> Result<(Var, Var)> {
        let w = b.var(name);
        Ok((matmul_last(tape, re, w)?, matmul_last(tape, im, w)?))
    };
    let (qr, qi) = proj(tape, "seasonal.fdam.w_q")?;
    let (kr, ki) = proj(tape, "seasonal.fdam.w_k")?;
    let (vr, vi) = proj(tape, "seasonal.fdam.w_v")?;

    let rr = tape.bmm(qr, kr, true)?;
    let ii = tape.bmm(qi, ki, true)?;
    let ri = tape.bmm(qr, ki, true)?;
    let ir = tape.bmm(qi, kr, true)?;
    let logit_re = tape.sub(rr, ii)?;
    let logit_im = tape.add(ri, ir)?;
    let modulus = tape.modulus(logit_re, logit_im)?;
    let d_k = b.params.config.attention_dim as f64;
    let scaled = tape.scale(modulus, 1.0 / d_k.sqrt());
    let attention = tape.softmax(scaled)?;

    let from_tokens = |tape: &mut Tape, v: Var| -> Result<Var> {
        let v = tape.permute(v, &[0, 2, 1])?;
        tape.reshape(v, &[n * m, c])
    };
    let or = tape.bmm(attention, vr, false)?;
    let oi = tape.bmm(attention, vi, false)?;
    let (or, oi) = (from_tokens(tape, or)?, from_tokens(tape, oi)?);

    let (out, imag_residue) = if freq {
        let a = tape.matmul(or, cos)?;
        let s = tape.matmul(oi, sin)?;
        let d = tape.sub(a, s)?;
        let out = tape.scale(d, 1.0 / c as f64);
        let imag = tape.value(or).matmul(&tr.dft.1)?.add(&tape.value(oi).matmul(&tr.dft.0)?)?;
        (out, imag.max_abs() / c as f64)
    } else {
        (or, 0.0)
    };
    Ok(FdamTrace {
        attention,
        output: tape.reshape(out, &[n, m, c])?,
        imag_residue,
    })
}

pub struct SeasonalTrace {
    pub fdam: FdamTrace,
    pub output: Var,
}

pub fn seasonal_encode_on(tape: &mut Tape, b: &Bound, tr: &Transforms, x: Var) -> Result<SeasonalTrace> {
    let (n, m, c) = dims3(tape, x, "seasonal_encode")?;
    if m != b.params.n_modalities || c != b.params.config.component_len() {
        return Err(Error::dim(
            "seasonal_encode",
            &[n, m, c],
            &[n, b.params.n_modalities, b.params.config.component_len()],
        ));
    }
    let fdam = fdam_on(tape, b, tr, x)?;
    let output = b.graph_stack(tape, "seasonal", fdam.output)?;
    Ok(SeasonalTrace { fdam, output })
}

/// Inverse decomposition followed by the output linear map along time.
pub fn decode_on(tape: &mut Tape, b: &Bound, tr: &Transforms, z_tre: Var, z_sea: Var) -> Result<Var> {
    let (n, m, c) = dims3(tape, z_tre, "decode")?;
    if tape.shape(z_sea) != [n, m, c] {
        return Err(Error::dim("decode", &[n, m, c], tape.shape(z_sea)));
    }
    let zt = tape.reshape(z_tre, &[n * m, c])?;
    let zs = tape.reshape(z_sea, &[n * m, c])?;
    let series = match &tr.synthesis {
        Some((low, high)) => {
            let (pl, ph) = (tape.constant(low.clone()), tape.constant(high.clone()));
            let a = tape.matmul(zt, pl)?;
            let d = tape.matmul(zs, ph)?;
            tape.add(a, d)?
        }
        None => tape.add(zt, zs)?,
    };
    let y = tape.matmul(series, b.var("output.w"))?;
    let y = tape.add_bias(y, b.var("output.b"))?;
    let w = b.params.config.window;
    tape.reshape(y, &[n, m, w])
}

/// Handles to every stage of one forward pass.
pub struct ForwardTrace {
    pub trend_in: Var,
    pub seasonal_in: Var,
    pub trend: TrendTrace,
    pub seasonal: SeasonalTrace,
    pub reconstruction: Var,
}

/// Full forward pass on an already decomposed window.
pub fn forward_on(tape: &mut Tape, b: &Bound, tr: &Transforms, parts: &DecomposedSeries) -> Result<ForwardTrace> {
    let trend_in = tape.constant(parts.trend.clone());
    let seasonal_in = tape.constant(parts.seasonal.clone());
    let trend = trend_encode_on(tape, b, trend_in)?;
    let seasonal = seasonal_encode_on(tape, b, tr, seasonal_in)?;
    let reconstruction = decode_on(tape, b, tr, trend.output, seasonal.output)?;
    Ok(ForwardTrace {
        trend_in,
        seasonal_in,
        trend,
        seasonal,
        reconstruction,
    })
}

/// `mean((x − x̂)²)` on the tape.
pub fn mse_on(tape: &mut Tape, x: Var, x_hat: Var) -> Result<Var> {
    let d = tape.sub(x, x_hat)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// Values of every stage of a forward pass, for inspection.
#[derive(Clone, Debug)]
pub struct Activations {
    pub trend_in: Tensor,
    pub seasonal_in: Tensor,
    pub trend_mlp: Tensor,
    pub trend_out: Tensor,
    pub fdam_attention: Tensor,
    pub fdam_out: Tensor,
    pub fdam_imag_residue: f64,
    pub seasonal_out: Tensor,
    pub reconstruction: Tensor,
}

/// Runs the model on one window `N×M×W` and captures every stage.
pub fn capture(x: &Tensor, params: &ModelParams) -> Result<Activations> {
    check_window(x, params)?;
    let tr = Transforms::new(&params.config)?;
    let parts = decompose(x, &params.config)?;
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, params, false);
    let f = forward_on(&mut tape, &b, &tr, &parts)?;
    let v = |var: Var| tape.value(var).clone();
    Ok(Activations {
        trend_in: v(f.trend_in),
        seasonal_in: v(f.seasonal_in),
        trend_mlp: v(f.trend.mlp),
        trend_out: v(f.trend.output),
        fdam_attention: v(f.seasonal.fdam.attention),
        fdam_out: v(f.seasonal.fdam.output),
        fdam_imag_residue: f.seasonal.fdam.imag_residue,
        seasonal_out: v(f.seasonal.output),
        reconstruction: v(f.reconstruction),
    })
}

/// Reconstruction `x̂` of one window.
pub fn reconstruct(x: &Tensor, params: &ModelParams) -> Result<Tensor> {
    let tr = Transforms::new(&params.config)?;
    reconstruct_with(x, params, &tr)
}

pub(crate) fn reconstruct_with(x: &Tensor, params: &ModelParams, tr: &Transforms) -> Result<Tensor> {
    check_window(x, params)?;
    let parts = decompose(x, &params.config)?;
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, params, false);
    let f = forward_on(&mut tape, &b, tr, &parts)?;
    Ok(tape.value(f.reconstruction).clone())
}

pub(crate) fn check_window(x: &Tensor, params: &ModelParams) -> Result<()> {
    let want = [params.adjacency.len(), params.n_modalities, params.config.window];
    if x.shape() != want {
        return Err(Error::dim("window", x.shape(), &want));
    }
    Ok(())
}

fn run_single<F>(params: &ModelParams, inputs: &[&Tensor], f: F) -> Result<Tensor>
where
    F: FnOnce(&mut Tape, &Bound, &Transforms, &[Var]) -> Result<Var>,
{
    let tr = Transforms::new(&params.config)?;
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, params, false);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant((*t).clone())).collect();
    let out = f(&mut tape, &b, &tr, &vars)?;
    Ok(tape.value(out).clone())
}

/// Encodes a trend component `N×M×C`.
pub fn trend_encode(x_tre: &Tensor, params: &ModelParams) -> Result<Tensor> {
    run_single(params, &[x_tre], |t, b, _, v| Ok(trend_encode_on(t, b, v[0])?.output))
}

/// Attended seasonal features, before the graph layers.
pub fn fdam(x_sea: &Tensor, params: &ModelParams) -> Result<Tensor> {
    run_single(params, &[x_sea], |t, b, tr, v| Ok(fdam_on(t, b, tr, v[0])?.output))
}

pub fn seasonal_encode(x_sea: &Tensor, params: &ModelParams) -> Result<Tensor> {
    run_single(params, &[x_sea], |t, b, tr, v| Ok(seasonal_encode_on(t, b, tr, v[0])?.output))
}

pub fn decode(z_tre: &Tensor, z_sea: &Tensor, params: &ModelParams) -> Result<Tensor> {
    run_single(params, &[z_tre, z_sea], |t, b, tr, v| decode_on(t, b, tr, v[0], v[1]))
}

/// Mean squared error over all cells.
pub fn loss_mse(x: &Tensor, x_hat: &Tensor) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dim("loss_mse", x.shape(), x_hat.shape()));
    }
    if x.is_empty() {
        return Err(Error::Contract("loss of an empty tensor".into()));
    }
    let d = x.sub(x_hat)?;
    Ok(d.data().iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}
