//! Wengert-style gradient tape.
//!
//! Every primitive appends a node holding its forward value and enough
//! context to run its vector-Jacobian product. `backward` walks the node
//! list once in reverse, which is a valid reverse topological order because
//! a node can only reference nodes created before it.

use super::{gemm, gemm_at, gemm_bt, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    BatchMatMul { a: Var, b: Var, transpose_b: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Square(Var),
    Modulus(Var, Var),
    Softmax(Var),
    Permute(Var, Vec<usize>),
    Reshape(Var),
    Select { x: Var, axis: usize, index: usize },
    Stack { parts: Vec<Var>, axis: usize },
    MeanLast(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, usize)>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to a recorded value; zeros when the output does
    /// not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    /// Gradients for parameter slots `0..count`, zero-filled for slots that
    /// were never recorded or never reached.
    pub fn params(&self, shapes: &[&[usize]]) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        for &(slot, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                if let Some(dst) = out.get_mut(slot) {
                    for (d, s) in dst.data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
            }
        }
        out
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn accumulate(slot: &mut Option<Tensor>, shape: &[usize], f: impl FnOnce(&mut [f64])) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape));
    f(t.data_mut());
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddBias(a, b)
            | Op::Modulus(a, b)
            | Op::BatchMatMul { a, b, .. } => self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad,
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Square(a)
            | Op::Softmax(a)
            | Op::Permute(a, _)
            | Op::Reshape(a)
            | Op::MeanLast(a)
            | Op::Mean(a)
            | Op::Select { x: a, .. } => self.nodes[a.0].needs_grad,
            Op::Stack { parts, .. } => parts.iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that gradients do not flow into.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// Records a trainable value; `slot` identifies it in [`Gradients::params`].
    pub fn param(&mut self, slot: usize, t: Tensor) -> Var {
        self.push(t, Op::Param(slot))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Batched product over a shared leading axis: `B×m×k · B×k×n`, or
    /// `B×m×k · (B×n×k)ᵀ` when `transpose_b` is set.
    pub fn bmm(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ok = sa.len() == 3
            && sb.len() == 3
            && sa[0] == sb[0]
            && if transpose_b { sa[2] == sb[2] } else { sa[2] == sb[1] };
        if !ok {
            return Err(Error::dim("bmm", sa, sb));
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let n = if transpose_b { sb[1] } else { sb[2] };
        let mut out = vec![0.0; batch * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for bi in 0..batch {
            let ab = &av[bi * m * k..(bi + 1) * m * k];
            let bb = &bv[bi * k * n..(bi + 1) * k * n];
            let ob = &mut out[bi * m * n..(bi + 1) * m * n];
            if transpose_b {
                gemm_bt(ab, bb, ob, m, k, n);
            } else {
                gemm(ab, bb, ob, m, k, n);
            }
        }
        let out = Tensor::new(vec![batch, m, n], out)?;
        Ok(self.push(out, Op::BatchMatMul { a, b, transpose_b }))
    }

    /// `a · bᵀ` for 2-D values.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::dim("matmul_t", &sa, &sb));
        }
        let a3 = self.reshape(a, &[1, sa[0], sa[1]])?;
        let b3 = self.reshape(b, &[1, sb[0], sb[1]])?;
        let c = self.bmm(a3, b3, true)?;
        self.reshape(c, &[sa[0], sb[0]])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a vector along the last axis of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let c = ta.last_dim();
        if tb.len() != c || c == 0 {
            return Err(Error::dim("add_bias", ta.shape(), tb.shape()));
        }
        let mut out = ta.clone();
        for row in out.data_mut().chunks_mut(c) {
            for (o, b) in row.iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).scale(c);
        self.push(out, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v * v);
        self.push(out, Op::Square(a))
    }

    /// Elementwise complex modulus `sqrt(re² + im²)`.
    pub fn modulus(&mut self, re: Var, im: Var) -> Result<Var> {
        let out = self
            .value(re)
            .zip_with(self.value(im), "modulus", |r, i| r.hypot(i))?;
        Ok(self.push(out, Op::Modulus(re, im)))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).softmax_rows()?;
        Ok(self.push(out, Op::Softmax(a)))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let nd = self.shape(a).len();
        let mut seen = vec![false; nd];
        if perm.len() != nd || perm.iter().any(|&p| p >= nd || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::dim("permute", self.shape(a), perm));
        }
        let out = self.value(a).permute(perm);
        Ok(self.push(out, Op::Permute(a, perm.to_vec())))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Picks `index` along `axis`, dropping that axis.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || index >= shape[axis] {
            return Err(Error::dim("select", &shape, &[axis, index]));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * len + index) * inner;
            out.extend_from_slice(&src[base..base + inner]);
        }
        let mut out_shape = shape;
        out_shape.remove(axis);
        let out = Tensor::new(out_shape, out)?;
        Ok(self.push(out, Op::Select { x, axis, index }))
    }

    /// Stacks equally shaped values along a new axis at position `axis`.
    pub fn stack(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("stack of zero tensors".into()))?;
        let shape = self.shape(*first).to_vec();
        if axis > shape.len() {
            return Err(Error::dim("stack", &shape, &[axis]));
        }
        for p in parts {
            if self.shape(*p) != shape.as_slice() {
                return Err(Error::dim("stack", &shape, self.shape(*p)));
            }
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis..].iter().product();
        let k = parts.len();
        let mut out = vec![0.0; outer * k * inner];
        for (pi, p) in parts.iter().enumerate() {
            let src = self.value(*p).data();
            for o in 0..outer {
                let dst = (o * k + pi) * inner;
                out[dst..dst + inner].copy_from_slice(&src[o * inner..(o + 1) * inner]);
            }
        }
        let mut out_shape = shape;
        out_shape.insert(axis, k);
        let out = Tensor::new(out_shape, out)?;
        Ok(self.push(out, Op::Stack { parts: parts.to_vec(), axis }))
    }

    /// Mean over the last axis, dropping it.
    pub fn mean_last(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let c = t.last_dim();
        if c == 0 || t.ndim() < 2 {
            return Err(Error::dim("mean_last", t.shape(), &[1]));
        }
        let data = t.data().chunks(c).map(|r| r.iter().sum::<f64>() / c as f64).collect();
        let shape = t.shape()[..t.ndim() - 1].to_vec();
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::MeanLast(a)))
    }

    /// Mean of all elements, as a one-element tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(out, Op::Mean(a))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, got shape {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::new(out.shape().to_vec(), vec![1.0])?);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(slot) => Some((slot, i)),
                _ => None,
            })
            .collect();
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients {
            grads,
            params,
            shapes,
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], ta.shape(), |d| gemm_bt(gd, tb.data(), d, m, n, k));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], tb.shape(), |d| gemm_at(ta.data(), gd, d, k, m, n));
                }
            }
            Op::BatchMatMul { a, b, transpose_b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (batch, m, k) = (ta.shape()[0], ta.shape()[1], ta.shape()[2]);
                let n = if *transpose_b { tb.shape()[1] } else { tb.shape()[2] };
                let (sa, sb, sc) = (m * k, k * n, m * n);
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], ta.shape(), |d| {
                        for bi in 0..batch {
                            let gc = &gd[bi * sc..(bi + 1) * sc];
                            let bb = &tb.data()[bi * sb..(bi + 1) * sb];
                            let da = &mut d[bi * sa..(bi + 1) * sa];
                            if *transpose_b {
                                gemm(gc, bb, da, m, n, k);
                            } else {
                                gemm_bt(gc, bb, da, m, n, k);
                            }
                        }
                    });
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], tb.shape(), |d| {
                        for bi in 0..batch {
                            let gc = &gd[bi * sc..(bi + 1) * sc];
                            let ab = &ta.data()[bi * sa..(bi + 1) * sa];
                            let db = &mut d[bi * sb..(bi + 1) * sb];
                            if *transpose_b {
                                gemm_at(gc, ab, db, n, m, k);
                            } else {
                                gemm_at(ab, gc, db, k, m, n);
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                    });
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(x, y)| *x += sign * y)
                    });
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.shape(), |d| {
                        for ((x, y), v) in d.iter_mut().zip(gd).zip(tb.data()) {
                            *x += y * v;
                        }
                    });
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g.shape(), |d| {
                        for ((x, y), v) in d.iter_mut().zip(gd).zip(ta.data()) {
                            *x += y * v;
                        }
                    });
                }
            }
            Op::AddBias(a, bias) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                    });
                }
                if self.wants(*bias) {
                    let tb = self.value(*bias);
                    let c = tb.len();
                    accumulate(&mut grads[bias.0], tb.shape(), |d| {
                        for row in gd.chunks(c) {
                            d.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                        }
                    });
                }
            }
            Op::Scale(a, c) => {
                accumulate(&mut grads[a.0], g.shape(), |d| {
                    d.iter_mut().zip(gd).for_each(|(x, y)| *x += c * y)
                });
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                accumulate(&mut grads[a.0], g.shape(), |d| {
                    for ((x, y), v) in d.iter_mut().zip(gd).zip(ta.data()) {
                        if *v > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            Op::Square(a) => {
                let ta = self.value(*a);
                accumulate(&mut grads[a.0], g.shape(), |d| {
                    for ((x, y), v) in d.iter_mut().zip(gd).zip(ta.data()) {
                        *x += 2.0 * v * y;
                    }
                });
            }
            Op::Modulus(re, im) => {
                let z = node.value.data();
                for (part, sel) in [(*re, self.value(*re)), (*im, self.value(*im))] {
                    if !self.wants(part) {
                        continue;
                    }
                    accumulate(&mut grads[part.0], g.shape(), |d| {
                        for (((x, y), v), zz) in d.iter_mut().zip(gd).zip(sel.data()).zip(z) {
                            if *zz > 0.0 {
                                *x += y * v / zz;
                            }
                        }
                    });
                }
            }
            Op::Softmax(a) => {
                let y = node.value.data();
                let c = node.value.last_dim();
                accumulate(&mut grads[a.0], g.shape(), |d| {
                    for ((drow, grow), yrow) in d.chunks_mut(c).zip(gd.chunks(c)).zip(y.chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((x, gy), yy) in drow.iter_mut().zip(grow).zip(yrow) {
                            *x += yy * (gy - dot);
                        }
                    }
                });
            }
            Op::Permute(a, perm) => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                let back = g.permute(&inv);
                accumulate(&mut grads[a.0], back.shape(), |d| {
                    d.iter_mut().zip(back.data()).for_each(|(x, y)| *x += y)
                });
            }
            Op::Reshape(a) => {
                let shape = self.shape(*a).to_vec();
                accumulate(&mut grads[a.0], &shape, |d| {
                    d.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                });
            }
            Op::Select { x, axis, index } => {
                let shape = self.shape(*x).to_vec();
                let (outer, len, inner) = split_axis(&shape, *axis);
                accumulate(&mut grads[x.0], &shape, |d| {
                    for o in 0..outer {
                        let base = (o * len + index) * inner;
                        d[base..base + inner]
                            .iter_mut()
                            .zip(&gd[o * inner..(o + 1) * inner])
                            .for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Stack { parts, axis } => {
                let shape = self.shape(parts[0]).to_vec();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[*axis..].iter().product();
                let k = parts.len();
                for (pi, p) in parts.iter().enumerate() {
                    if !self.wants(*p) {
                        continue;
                    }
                    accumulate(&mut grads[p.0], &shape, |d| {
                        for o in 0..outer {
                            let src = (o * k + pi) * inner;
                            d[o * inner..(o + 1) * inner]
                                .iter_mut()
                                .zip(&gd[src..src + inner])
                                .for_each(|(x, y)| *x += y);
                        }
                    });
                }
            }
            Op::MeanLast(a) => {
                let ta = self.value(*a);
                let c = ta.last_dim();
                accumulate(&mut grads[a.0], ta.shape(), |d| {
                    for (row, gy) in d.chunks_mut(c).zip(gd) {
                        row.iter_mut().for_each(|x| *x += gy / c as f64);
                    }
                });
            }
            Op::Mean(a) => {
                let ta = self.value(*a);
                let share = gd[0] / ta.len() as f64;
                accumulate(&mut grads[a.0], ta.shape(), |d| d.iter_mut().for_each(|x| *x += share));
            }
        }
    }
}
