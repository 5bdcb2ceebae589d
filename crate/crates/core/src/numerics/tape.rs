//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends one node holding its forward value and whatever
//! the backward rule needs. Nodes only reference earlier nodes, so the tape is
//! acyclic by construction and a reverse sweep visits each node once.

use crate::error::{shape_err, Error, Result};

use super::tensor::{gemm, Layout, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Batch-normalization mode.
#[derive(Clone, Copy, Debug)]
pub enum NormMode<'a> {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with recorded running statistics.
    Inference { mean: &'a [f64], var: &'a [f64] },
}

/// Statistics of one training-mode batch-norm call, used to update running
/// estimates outside the tape.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance over the normalized rows.
    pub var: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        a: Var,
        c: f64,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Select {
        a: Var,
        axis: usize,
        indices: Vec<usize>,
    },
    Reshape {
        a: Var,
    },
    LeakyRelu {
        a: Var,
        slope: f64,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        dilation: usize,
        patches: Vec<f64>,
    },
    Sum {
        a: Var,
    },
    Mean {
        a: Var,
    },
    Abs {
        a: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], keyed by leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf created with `requires_grad`. Leaves the backward
    /// sweep never reached carry an all-zero gradient.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// A leaf that takes part in differentiation.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Matrix product of `a: m×k` with `b: k×n` (or a length-`k` vector).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k) = match sa[..] {
            [m, k] => (m, k),
            _ => return Err(shape_err("matmul", &sa, &sb)),
        };
        let (n, out_shape) = match sb[..] {
            [kb] if kb == k => (1, vec![m]),
            [kb, n] if kb == k => (n, vec![m, n]),
            _ => return Err(shape_err("matmul", &sa, &sb)),
        };
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            Layout::Normal,
            self.value(b).data(),
            Layout::Normal,
            0.0,
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            Tensor::from_parts(out_shape, out),
            Op::MatMul { a, b, m, k, n },
            rg,
        ))
    }

    /// Affine map over the last axis: `x · wᵀ + b` with `w: out × in`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let k = *xs.last().ok_or_else(|| shape_err("linear", &xs, &ws))?;
        if ws.len() != 2 || ws[1] != k {
            return Err(shape_err("linear", &xs, &ws));
        }
        let n = ws[0];
        if let Some(b) = b {
            if self.shape(b) != [n] {
                return Err(shape_err("linear bias", &ws, self.shape(b)));
            }
        }
        let m = self.value(x).rows();
        let mut out = vec![0.0; m * n];
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.chunks_exact_mut(n) {
                row.copy_from_slice(bias);
            }
        }
        gemm(
            m,
            k,
            n,
            self.value(x).data(),
            Layout::Normal,
            self.value(w).data(),
            Layout::Transposed,
            if b.is_some() { 1.0 } else { 0.0 },
            &mut out,
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(&[x, w]) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(Tensor::from_parts(shape, out), Op::Linear { x, w, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = broadcast_binary("add", self.value(a), self.value(b), |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = broadcast_binary("sub", self.value(a), self.value(b), |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub { a, b }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = broadcast_binary("mul", self.value(a), self.value(b), |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        let rg = self.requires_grad(a);
        self.push(out, Op::Scale { a, c }, rg)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat axis", &base, &[axis]));
        }
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let span = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * span..(o + 1) * span]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Gathers the listed positions along `axis`, in the order given.
    pub fn select(&mut self, a: Var, axis: usize, indices: &[usize]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || indices.is_empty() {
            return Err(shape_err("select", &s, &[axis, indices.len()]));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= s[axis]) {
            return Err(Error::Invalid(format!(
                "select index {bad} out of range for axis {axis} of {s:?}"
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            let base = o * s[axis] * inner;
            for &i in indices {
                out.extend_from_slice(&src[base + i * inner..base + (i + 1) * inner]);
            }
        }
        let mut shape = s;
        shape[axis] = indices.len();
        let rg = self.requires_grad(a);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Select {
                a,
                axis,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape.to_vec())?;
        let rg = self.requires_grad(a);
        Ok(self.push(out, Op::Reshape { a }, rg))
    }

    /// `max(x, slope·x)` for `0 ≤ slope < 1`.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.requires_grad(a);
        self.push(out, Op::LeakyRelu { a, slope }, rg)
    }

    /// Per-channel normalization over every axis but the last.
    ///
    /// Returns the batch statistics in training mode.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: NormMode<'_>,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats>)> {
        let xv = self.value(x);
        let c = xv.last_dim();
        let m = xv.rows();
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(shape_err("batch_norm", xv.shape(), self.shape(gamma)));
        }
        let data = xv.data();
        let (mean, var, stats) = match mode {
            NormMode::Train => {
                if m < 2 {
                    return Err(Error::BatchTooSmall(m));
                }
                let mut mean = vec![0.0; c];
                for row in data.chunks_exact(c) {
                    for (acc, &v) in mean.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m as f64);
                let mut var = vec![0.0; c];
                for row in data.chunks_exact(c) {
                    for ((acc, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
                        *acc += (v - mu) * (v - mu);
                    }
                }
                var.iter_mut().for_each(|v| *v /= m as f64);
                let unbiased = var.iter().map(|v| v * m as f64 / (m - 1) as f64).collect();
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats))
            }
            NormMode::Inference { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(shape_err("batch_norm running stats", &[c], &[mean.len()]));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = Vec::with_capacity(data.len());
        let mut out = Vec::with_capacity(data.len());
        for row in data.chunks_exact(c) {
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(g[j] * h + b[j]);
            }
        }
        let shape = xv.shape().to_vec();
        let train = stats.is_some();
        let rg = self.rg(&[x, gamma, beta]);
        let v = self.push(
            Tensor::from_parts(shape, out),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            },
            rg,
        );
        Ok((v, stats))
    }

    /// Valid (unpadded) dilated convolution over time.
    ///
    /// `x: batch × T × in`, `w: out × kernel × in`, optional bias `out`.
    /// Output is `batch × (T − dilation·(kernel−1)) × out`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, dilation: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let (batch, t, cin) = match xs[..] {
            [b, t, c] => (b, t, c),
            _ => return Err(shape_err("conv1d input", &xs, &ws)),
        };
        let (cout, kernel) = match ws[..] {
            [o, k, c] if c == cin => (o, k),
            _ => return Err(shape_err("conv1d", &xs, &ws)),
        };
        if dilation == 0 {
            return Err(Error::Invalid("conv1d dilation must be at least 1".into()));
        }
        let span = dilation * (kernel - 1);
        if t <= span {
            return Err(Error::Invalid(format!(
                "conv1d needs at least {} frames for kernel {kernel} and dilation {dilation}, got {t}",
                span + 1
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [cout] {
                return Err(shape_err("conv1d bias", &ws, self.shape(b)));
            }
        }
        let t_out = t - span;
        let patches = unfold(self.value(x).data(), batch, t, cin, kernel, dilation);
        let rows = batch * t_out;
        let mut out = vec![0.0; rows * cout];
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.chunks_exact_mut(cout) {
                row.copy_from_slice(bias);
            }
        }
        gemm(
            rows,
            kernel * cin,
            cout,
            &patches,
            Layout::Normal,
            self.value(w).data(),
            Layout::Transposed,
            if b.is_some() { 1.0 } else { 0.0 },
            &mut out,
        );
        let rg = self.rg(&[x, w]) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(
            Tensor::from_parts(vec![batch, t_out, cout], out),
            Op::Conv1d {
                x,
                w,
                b,
                dilation,
                patches,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().fold(0.0, |acc, v| acc + v);
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(s), Op::Sum { a }, rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().fold(0.0, |acc, x| acc + x) / v.len() as f64;
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(s), Op::Mean { a }, rg)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::abs);
        let rg = self.requires_grad(a);
        self.push(out, Op::Abs { a }, rg)
    }

    /// Propagates d(output)/d(node) back to every leaf created with
    /// `requires_grad`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = &self.nodes[output.0];
        if out.value.len() != 1 {
            return Err(Error::NonScalarOutput(out.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if out.requires_grad {
            grads[output.0] = Some(Tensor::full(out.value.shape().to_vec(), 1.0));
        }
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(node, &g, &mut grads)?;
        }
        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            let is_leaf = matches!(node.op, Op::Leaf);
            if !is_leaf || !node.requires_grad {
                *g = None;
            } else if g.is_none() {
                *g = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        Ok(Gradients { grads })
    }

    fn backprop(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let want = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, m, k, n } => {
                if want(a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(
                        *m,
                        *n,
                        *k,
                        g.data(),
                        Layout::Normal,
                        self.value(*b).data(),
                        Layout::Transposed,
                        0.0,
                        &mut ga,
                    );
                    accumulate(grads, *a, Tensor::from_parts(vec![*m, *k], ga));
                }
                if want(b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(
                        *k,
                        *m,
                        *n,
                        self.value(*a).data(),
                        Layout::Transposed,
                        g.data(),
                        Layout::Normal,
                        0.0,
                        &mut gb,
                    );
                    let shape = self.shape(*b).to_vec();
                    accumulate(grads, *b, Tensor::from_parts(shape, gb));
                }
            }
            Op::Linear { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (m, k, n) = (xv.rows(), xv.last_dim(), wv.shape()[0]);
                if want(x) {
                    let mut gx = vec![0.0; m * k];
                    gemm(
                        m,
                        n,
                        k,
                        g.data(),
                        Layout::Normal,
                        wv.data(),
                        Layout::Normal,
                        0.0,
                        &mut gx,
                    );
                    accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
                }
                if want(w) {
                    let mut gw = vec![0.0; n * k];
                    gemm(
                        n,
                        m,
                        k,
                        g.data(),
                        Layout::Transposed,
                        xv.data(),
                        Layout::Normal,
                        0.0,
                        &mut gw,
                    );
                    accumulate(grads, *w, Tensor::from_parts(vec![n, k], gw));
                }
                if let Some(b) = b.filter(|b| want(b)) {
                    accumulate(
                        grads,
                        b,
                        Tensor::from_parts(vec![n], column_sums(g.data(), n)),
                    );
                }
            }
            Op::Add { a, b } | Op::Sub { a, b } => {
                let sign = if matches!(node.op, Op::Sub { .. }) {
                    -1.0
                } else {
                    1.0
                };
                if want(a) {
                    accumulate(grads, *a, reduce_to(g, self.shape(*a)));
                }
                if want(b) {
                    let mut gb = reduce_to(g, self.shape(*b));
                    if sign < 0.0 {
                        gb.data_mut().iter_mut().for_each(|v| *v = -*v);
                    }
                    accumulate(grads, *b, gb);
                }
            }
            Op::Mul { a, b } => {
                if want(a) {
                    let t = broadcast_binary("mul backward", g, self.value(*b), |x, y| x * y)?;
                    accumulate(grads, *a, reduce_to(&t, self.shape(*a)));
                }
                if want(b) {
                    let t = broadcast_binary("mul backward", g, self.value(*a), |x, y| x * y)?;
                    accumulate(grads, *b, reduce_to(&t, self.shape(*b)));
                }
            }
            Op::Scale { a, c } => {
                if want(a) {
                    accumulate(grads, *a, g.map(|v| c * v));
                }
            }
            Op::Concat { parts, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let ps = self.shape(*p).to_vec();
                    let span = ps[*axis] * inner;
                    if want(p) {
                        let mut gp = Vec::with_capacity(outer * span);
                        for o in 0..outer {
                            let start = o * total + offset;
                            gp.extend_from_slice(&g.data()[start..start + span]);
                        }
                        accumulate(grads, *p, Tensor::from_parts(ps, gp));
                    }
                    offset += span;
                }
            }
            Op::Select { a, axis, indices } => {
                let s = self.shape(*a).to_vec();
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[axis + 1..].iter().product();
                let mut ga = vec![0.0; s.iter().product()];
                let gd = g.data();
                for o in 0..outer {
                    let base = o * s[*axis] * inner;
                    let gbase = o * indices.len() * inner;
                    for (j, &i) in indices.iter().enumerate() {
                        let dst = &mut ga[base + i * inner..base + (i + 1) * inner];
                        let src = &gd[gbase + j * inner..gbase + (j + 1) * inner];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
                accumulate(grads, *a, Tensor::from_parts(s, ga));
            }
            Op::Reshape { a } => {
                let s = self.shape(*a).to_vec();
                accumulate(grads, *a, Tensor::from_parts(s, g.data().to_vec()));
            }
            Op::LeakyRelu { a, slope } => {
                let x = self.value(*a).data();
                let ga = x
                    .iter()
                    .zip(g.data())
                    .map(|(&x, &g)| if x > 0.0 { g } else { slope * g })
                    .collect();
                accumulate(
                    grads,
                    *a,
                    Tensor::from_parts(node.value.shape().to_vec(), ga),
                );
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let c = inv_std.len();
                let m = xhat.len() / c;
                let gd = g.data();
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for (grow, hrow) in gd.chunks_exact(c).zip(xhat.chunks_exact(c)) {
                    for j in 0..c {
                        sum_g[j] += grow[j];
                        sum_gx[j] += grow[j] * hrow[j];
                    }
                }
                if want(gamma) {
                    accumulate(grads, *gamma, Tensor::from_parts(vec![c], sum_gx.clone()));
                }
                if want(beta) {
                    accumulate(grads, *beta, Tensor::from_parts(vec![c], sum_g.clone()));
                }
                if want(x) {
                    let gam = self.value(*gamma).data();
                    let mut gx = Vec::with_capacity(gd.len());
                    for (grow, hrow) in gd.chunks_exact(c).zip(xhat.chunks_exact(c)) {
                        for j in 0..c {
                            let v = if *train {
                                let mf = m as f64;
                                gam[j]
                                    * inv_std[j]
                                    * (grow[j] - sum_g[j] / mf - hrow[j] * sum_gx[j] / mf)
                            } else {
                                gam[j] * inv_std[j] * grow[j]
                            };
                            gx.push(v);
                        }
                    }
                    accumulate(
                        grads,
                        *x,
                        Tensor::from_parts(node.value.shape().to_vec(), gx),
                    );
                }
            }
            Op::Conv1d {
                x,
                w,
                b,
                dilation,
                patches,
            } => {
                let xs = self.shape(*x).to_vec();
                let ws = self.shape(*w).to_vec();
                let (batch, t, cin) = (xs[0], xs[1], xs[2]);
                let (cout, kernel) = (ws[0], ws[1]);
                let t_out = node.value.shape()[1];
                let rows = batch * t_out;
                let kc = kernel * cin;
                if want(w) {
                    let mut gw = vec![0.0; cout * kc];
                    gemm(
                        cout,
                        rows,
                        kc,
                        g.data(),
                        Layout::Transposed,
                        patches,
                        Layout::Normal,
                        0.0,
                        &mut gw,
                    );
                    accumulate(grads, *w, Tensor::from_parts(ws.clone(), gw));
                }
                if let Some(b) = b.filter(|b| want(b)) {
                    accumulate(
                        grads,
                        b,
                        Tensor::from_parts(vec![cout], column_sums(g.data(), cout)),
                    );
                }
                if want(x) {
                    let mut gp = vec![0.0; rows * kc];
                    gemm(
                        rows,
                        cout,
                        kc,
                        g.data(),
                        Layout::Normal,
                        self.value(*w).data(),
                        Layout::Normal,
                        0.0,
                        &mut gp,
                    );
                    let mut gx = vec![0.0; batch * t * cin];
                    for bi in 0..batch {
                        for ti in 0..t_out {
                            let prow = &gp[(bi * t_out + ti) * kc..(bi * t_out + ti + 1) * kc];
                            for k in 0..kernel {
                                let src = (bi * t + ti + k * dilation) * cin;
                                let dst = &mut gx[src..src + cin];
                                dst.iter_mut()
                                    .zip(&prow[k * cin..(k + 1) * cin])
                                    .for_each(|(d, s)| *d += s);
                            }
                        }
                    }
                    accumulate(grads, *x, Tensor::from_parts(xs, gx));
                }
            }
            Op::Sum { a } => {
                let s = self.shape(*a).to_vec();
                accumulate(grads, *a, Tensor::full(s, g.data()[0]));
            }
            Op::Mean { a } => {
                let v = self.value(*a);
                let gv = g.data()[0] / v.len() as f64;
                accumulate(grads, *a, Tensor::full(v.shape().to_vec(), gv));
            }
            Op::Abs { a } => {
                let x = self.value(*a).data();
                let ga = x
                    .iter()
                    .zip(g.data())
                    .map(|(&x, &g)| {
                        if x > 0.0 {
                            g
                        } else if x < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    })
                    .collect();
                accumulate(
                    grads,
                    *a,
                    Tensor::from_parts(node.value.shape().to_vec(), ga),
                );
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

fn column_sums(data: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in data.chunks_exact(cols) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
    out
}

fn unfold(
    x: &[f64],
    batch: usize,
    t: usize,
    cin: usize,
    kernel: usize,
    dilation: usize,
) -> Vec<f64> {
    let t_out = t - dilation * (kernel - 1);
    let mut patches = Vec::with_capacity(batch * t_out * kernel * cin);
    for b in 0..batch {
        for ti in 0..t_out {
            for k in 0..kernel {
                let src = (b * t + ti + k * dilation) * cin;
                patches.extend_from_slice(&x[src..src + cin]);
            }
        }
    }
    patches
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Elementwise op over equal-rank tensors where each axis either matches or
/// has extent 1 on one side.
fn broadcast_binary(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa == sb {
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        return Ok(Tensor::from_parts(sa.to_vec(), data));
    }
    if sa.len() != sb.len() {
        return Err(shape_err(op, sa, sb));
    }
    let mut out_shape = Vec::with_capacity(sa.len());
    for (&x, &y) in sa.iter().zip(sb) {
        if x == y || y == 1 {
            out_shape.push(x);
        } else if x == 1 {
            out_shape.push(y);
        } else {
            return Err(shape_err(op, sa, sb));
        }
    }
    let (ta, tb) = (strides(sa), strides(sb));
    let rank = out_shape.len();
    let eff_a: Vec<usize> = (0..rank)
        .map(|i| if sa[i] == 1 { 0 } else { ta[i] })
        .collect();
    let eff_b: Vec<usize> = (0..rank)
        .map(|i| if sb[i] == 1 { 0 } else { tb[i] })
        .collect();
    let n: usize = out_shape.iter().product();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);
    let (ad, bd) = (a.data(), b.data());
    for _ in 0..n {
        out.push(f(ad[ia], bd[ib]));
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            ia += eff_a[ax];
            ib += eff_b[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            ia -= eff_a[ax] * idx[ax];
            ib -= eff_b[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    Ok(Tensor::from_parts(out_shape, out))
}

/// Sums a broadcast gradient back down to `target` shape.
fn reduce_to(g: &Tensor, target: &[usize]) -> Tensor {
    if g.shape() == target {
        return g.clone();
    }
    let gs = g.shape();
    let rank = gs.len();
    let ts = strides(target);
    let eff: Vec<usize> = (0..rank)
        .map(|i| if target[i] == 1 { 0 } else { ts[i] })
        .collect();
    let mut out = vec![0.0; target.iter().product()];
    let mut idx = vec![0usize; rank];
    let mut it = 0usize;
    for &v in g.data() {
        out[it] += v;
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            it += eff[ax];
            if idx[ax] < gs[ax] {
                break;
            }
            it -= eff[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    Tensor::from_parts(target.to_vec(), out)
}
