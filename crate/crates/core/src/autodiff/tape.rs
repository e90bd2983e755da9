//! Reverse-mode differentiation over a recorded list of tensor operations.

use std::sync::Arc;

use rand::Rng as _;

use super::attention::{self, AttnDropout};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::tensor::{gemm, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `n×k + 1×k`
    AddRow(Var, Var),
    /// `n×k ⊙ 1×k`
    MulRow(Var, Var),
    /// `n×k ⊙ n×1`
    MulCol(Var, Var),
    Scale(Var, f64),
    /// Multiply by one entry of another tensor.
    ScaleBy(Var, Var, usize),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    RowGather(Var, Vec<usize>),
    Relu(Var),
    Gelu(Var),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    /// Keeps `1/sigma` per row; the node value is the normalized output.
    LayerNormRows(Var, Vec<f64>),
    /// Keeps the scaled keep-mask.
    Dropout(Var, Vec<f64>),
    Sum(Var),
    Mean(Var),
    /// Keeps the row softmax of the logits and the selected (row, label) pairs.
    MaskedCrossEntropy(Var, Tensor, Vec<(usize, usize)>),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        scale: f64,
        drop: Option<AttnDropout>,
    },
    /// `U·x` or `Uᵀ·x` against a shared constant matrix.
    BasisMul(Var, Arc<Tensor>, bool),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `var` does not lie on any path to the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

/// Forward computation record. One tape per forward/backward pass; tapes are
/// not shared between threads.
pub struct Tape {
    nodes: Vec<Node>,
    training: bool,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_C * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x)
}

fn shape_err(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch(format!(
        "{op}: {}x{} with {}x{}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols()
    ))
}

impl Tape {
    /// A tape in training mode (dropout active).
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            training: true,
        }
    }

    pub fn eval() -> Self {
        Tape {
            nodes: Vec::new(),
            training: false,
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite(format!("output of {}", op_name(&op))));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// `a·b`; `a` is `m×k`, `b` is `k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(name, x, y));
        }
        Ok(x.zip_map(y, f))
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    /// Elementwise (Hadamard) product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    fn row_broadcast(
        &mut self,
        a: Var,
        row: Var,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err(name, x, r));
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            for (o, &b) in out.row_slice_mut(i).iter_mut().zip(r.data()) {
                *o = f(*o, b);
            }
        }
        Ok(out)
    }

    /// Adds a `1×k` row to every row of an `n×k` tensor (bias).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.row_broadcast(a, row, "add_row", |x, b| x + b)?;
        let rg = self.rg(a) || self.rg(row);
        self.push(out, Op::AddRow(a, row), rg)
    }

    /// Multiplies every row of an `n×k` tensor by a `1×k` row (gain).
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.row_broadcast(a, row, "mul_row", |x, b| x * b)?;
        let rg = self.rg(a) || self.rg(row);
        self.push(out, Op::MulRow(a, row), rg)
    }

    /// Scales row `i` of an `n×k` tensor by entry `i` of an `n×1` column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (x, c) = (self.value(a), self.value(col));
        if c.cols() != 1 || c.rows() != x.rows() {
            return Err(shape_err("mul_col", x, c));
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            let s = c.data()[i];
            out.row_slice_mut(i).iter_mut().for_each(|o| *o *= s);
        }
        let rg = self.rg(a) || self.rg(col);
        self.push(out, Op::MulCol(a, col), rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * factor);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, factor), rg)
    }

    /// Multiplies `a` by the flat entry `index` of `weights`.
    pub fn scale_by(&mut self, a: Var, weights: Var, index: usize) -> Result<Var> {
        let w = self.value(weights);
        if index >= w.len() {
            return Err(Error::ShapeMismatch(format!(
                "scale_by index {index} into {} entries",
                w.len()
            )));
        }
        let factor = w.data()[index];
        let out = self.value(a).map(|x| x * factor);
        let rg = self.rg(a) || self.rg(weights);
        self.push(out, Op::ScaleBy(a, weights, index), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    /// Horizontal concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("concat_cols of nothing".into()))?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(*first), t));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            for i in 0..rows {
                out.row_slice_mut(i)[offset..offset + t.cols()].copy_from_slice(t.row_slice(i));
            }
            offset += t.cols();
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(Error::ShapeMismatch(format!(
                "slice_cols {start}..{} of {} columns",
                start + len,
                x.cols()
            )));
        }
        let mut out = Tensor::zeros(x.rows(), len);
        for i in 0..x.rows() {
            out.row_slice_mut(i)
                .copy_from_slice(&x.row_slice(i)[start..start + len]);
        }
        let rg = self.rg(a);
        self.push(out, Op::SliceCols(a, start), rg)
    }

    /// Selects rows by index (repeats allowed).
    pub fn row_gather(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::ShapeMismatch(format!(
                "row_gather index {bad} of {} rows",
                x.rows()
            )));
        }
        let mut out = Tensor::zeros(rows.len(), x.cols());
        for (k, &r) in rows.iter().enumerate() {
            out.row_slice_mut(k).copy_from_slice(x.row_slice(r));
        }
        let rg = self.rg(a);
        self.push(out, Op::RowGather(a, rows.to_vec()), rg)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let out = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(out, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, gelu, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::sin, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::cos, Op::Cos(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if let Some(bad) = x.data().iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonFinite(format!("log of {bad}")));
        }
        self.unary(a, f64::ln, Op::Log(a))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if !x.all_finite() {
            return Err(Error::NonFinite("softmax input".into()));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_slice_mut(i));
        }
        let rg = self.rg(a);
        self.push(out, Op::SoftmaxRows(a), rg)
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`, no affine part.
    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let k = x.cols() as f64;
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = out.row_slice_mut(i);
            let mean = row.iter().sum::<f64>() / k;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
            let s = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * s);
            inv_std.push(s);
        }
        let rg = self.rg(a);
        self.push(out, Op::LayerNormRows(a, inv_std), rg)
    }

    /// Inverted dropout with keep probability `1 - p`. Identity on an eval tape
    /// or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("dropout probability {p}")));
        }
        if !self.training || p == 0.0 {
            return Ok(a);
        }
        let mut rng = rng_for(seed, &[stream::DROPOUT, self.nodes.len() as u64]);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let mut out = self.value(a).clone();
        out.data_mut()
            .iter_mut()
            .zip(&mask)
            .for_each(|(o, m)| *o *= m);
        let rg = self.rg(a);
        self.push(out, Op::Dropout(a, mask), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::Empty("mean of an empty tensor".into()));
        }
        let out = Tensor::scalar(x.sum() / x.len() as f64);
        let rg = self.rg(a);
        self.push(out, Op::Mean(a), rg)
    }

    /// Mean cross-entropy of row-wise softmax over the nodes where `mask` holds.
    pub fn masked_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let x = self.value(logits);
        if labels.len() != x.rows() || mask.len() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "cross-entropy over {} rows with {} labels and {} mask entries",
                x.rows(),
                labels.len(),
                mask.len()
            )));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("cross-entropy logits".into()));
        }
        let picked: Vec<(usize, usize)> = (0..x.rows())
            .filter(|&i| mask[i])
            .map(|i| (i, labels[i]))
            .collect();
        if picked.is_empty() {
            return Err(Error::Empty("cross-entropy mask selects no nodes".into()));
        }
        if let Some(&(i, l)) = picked.iter().find(|&&(_, l)| l >= x.cols()) {
            return Err(Error::ShapeMismatch(format!(
                "label {l} at node {i} with {} classes",
                x.cols()
            )));
        }
        let mut probs = x.clone();
        let mut loss = 0.0;
        for i in 0..probs.rows() {
            let row = probs.row_slice_mut(i);
            let lse = log_sum_exp(row);
            if mask[i] {
                loss -= row[labels[i]] - lse;
            }
            row.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        let out = Tensor::scalar(loss / picked.len() as f64);
        let rg = self.rg(logits);
        self.push(out, Op::MaskedCrossEntropy(logits, probs, picked), rg)
    }

    /// `softmax(scale · q kᵀ) v` with optional dropout `p` on the weights. The
    /// weight matrix is recomputed in the backward pass instead of stored.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        scale: f64,
        p: f64,
        seed: u64,
    ) -> Result<Var> {
        let (qt, kt, vt) = (self.value(q), self.value(k), self.value(v));
        if qt.cols() != kt.cols() || kt.rows() != vt.rows() {
            return Err(Error::ShapeMismatch(format!(
                "attention: q {}x{}, k {}x{}, v {}x{}",
                qt.rows(),
                qt.cols(),
                kt.rows(),
                kt.cols(),
                vt.rows(),
                vt.cols()
            )));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("dropout probability {p}")));
        }
        let drop = (self.training && p > 0.0).then(|| AttnDropout {
            p,
            seed: crate::rng::derive_seed(seed, &[self.nodes.len() as u64]),
        });
        let out = attention::forward(qt, kt, vt, scale, drop);
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                scale,
                drop,
            },
            rg,
        )
    }

    /// `U·x`, or `Uᵀ·x` when `transpose` is set. `U` is shared, not copied.
    pub fn basis_mul(&mut self, u: &Arc<Tensor>, x: Var, transpose: bool) -> Result<Var> {
        let xt = self.value(x);
        let inner = if transpose { u.rows() } else { u.cols() };
        if inner != xt.rows() {
            return Err(shape_err("basis_mul", u, xt));
        }
        let rows = if transpose { u.cols() } else { u.rows() };
        let mut out = Tensor::zeros(rows, xt.cols());
        gemm(transpose, false, 1.0, u, xt, 0.0, &mut out);
        let rg = self.rg(x);
        self.push(out, Op::BasisMul(x, Arc::clone(u), transpose), rg)
    }

    /// Back-propagates from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != [1, 1] {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar loss, got {}x{}",
                shape[0], shape[1]
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if self.rg(*a) {
                    let mut da = Tensor::zeros(x.rows(), x.cols());
                    gemm(false, true, 1.0, g, y, 0.0, &mut da);
                    acc(*a, da);
                }
                if self.rg(*b) {
                    let mut db = Tensor::zeros(y.rows(), y.cols());
                    gemm(true, false, 1.0, x, g, 0.0, &mut db);
                    acc(*b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(val(*b), |d, y| d * y));
                acc(*b, g.zip_map(val(*a), |d, x| d * x));
            }
            Op::AddRow(a, r) => {
                acc(*a, g.clone());
                acc(*r, column_sums(g));
            }
            Op::MulRow(a, r) => {
                let (x, row) = (val(*a), val(*r));
                let mut da = g.clone();
                let mut dr = Tensor::zeros(1, row.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        da.set(i, j, g.get(i, j) * row.get(0, j));
                        dr.data_mut()[j] += g.get(i, j) * x.get(i, j);
                    }
                }
                acc(*a, da);
                acc(*r, dr);
            }
            Op::MulCol(a, c) => {
                let (x, col) = (val(*a), val(*c));
                let mut da = g.clone();
                let mut dc = Tensor::zeros(col.rows(), 1);
                for i in 0..g.rows() {
                    let s = col.data()[i];
                    let mut dot = 0.0;
                    for (j, d) in da.row_slice_mut(i).iter_mut().enumerate() {
                        dot += *d * x.get(i, j);
                        *d *= s;
                    }
                    dc.data_mut()[i] = dot;
                }
                acc(*a, da);
                acc(*c, dc);
            }
            Op::Scale(a, f) => acc(*a, g.map(|v| v * f)),
            Op::ScaleBy(a, w, k) => {
                let wt = val(*w);
                acc(*a, g.map(|v| v * wt.data()[*k]));
                let dot: f64 = g
                    .data()
                    .iter()
                    .zip(val(*a).data())
                    .map(|(d, x)| d * x)
                    .sum();
                let mut dw = Tensor::zeros(wt.rows(), wt.cols());
                dw.data_mut()[*k] = dot;
                acc(*w, dw);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).cols();
                    let mut d = Tensor::zeros(g.rows(), c);
                    for i in 0..g.rows() {
                        d.row_slice_mut(i)
                            .copy_from_slice(&g.row_slice(i)[offset..offset + c]);
                    }
                    acc(p, d);
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                let x = val(*a);
                let mut d = Tensor::zeros(x.rows(), x.cols());
                for i in 0..g.rows() {
                    d.row_slice_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row_slice(i));
                }
                acc(*a, d);
            }
            Op::RowGather(a, rows) => {
                let x = val(*a);
                let mut d = Tensor::zeros(x.rows(), x.cols());
                for (k, &r) in rows.iter().enumerate() {
                    for (o, v) in d.row_slice_mut(r).iter_mut().zip(g.row_slice(k)) {
                        *o += v;
                    }
                }
                acc(*a, d);
            }
            Op::Relu(a) => acc(*a, g.zip_map(val(*a), |d, x| if x > 0.0 { d } else { 0.0 })),
            Op::Gelu(a) => acc(*a, g.zip_map(val(*a), |d, x| d * gelu_grad(x))),
            Op::Tanh(a) => acc(*a, g.zip_map(&node.value, |d, y| d * (1.0 - y * y))),
            Op::Sin(a) => acc(*a, g.zip_map(val(*a), |d, x| d * x.cos())),
            Op::Cos(a) => acc(*a, g.zip_map(val(*a), |d, x| -d * x.sin())),
            Op::Exp(a) => acc(*a, g.zip_map(&node.value, |d, y| d * y)),
            Op::Log(a) => acc(*a, g.zip_map(val(*a), |d, x| d / x)),
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut d = g.clone();
                for i in 0..y.rows() {
                    let yr = y.row_slice(i);
                    let dot: f64 = g.row_slice(i).iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (o, &yv) in d.row_slice_mut(i).iter_mut().zip(yr) {
                        *o = yv * (*o - dot);
                    }
                }
                acc(*a, d);
            }
            Op::LayerNormRows(a, inv_std) => {
                let y = &node.value;
                let k = y.cols() as f64;
                let mut d = g.clone();
                for (i, &inv) in inv_std.iter().enumerate().take(y.rows()) {
                    let yr = y.row_slice(i);
                    let gr = g.row_slice(i);
                    let mean_g = gr.iter().sum::<f64>() / k;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / k;
                    for ((o, &gv), &yv) in d.row_slice_mut(i).iter_mut().zip(gr).zip(yr) {
                        *o = inv * (gv - mean_g - yv * mean_gy);
                    }
                }
                acc(*a, d);
            }
            Op::Dropout(a, mask) => {
                let mut d = g.clone();
                d.data_mut().iter_mut().zip(mask).for_each(|(o, m)| *o *= m);
                acc(*a, d);
            }
            Op::Sum(a) => {
                let x = val(*a);
                acc(*a, Tensor::filled(x.rows(), x.cols(), g.item()));
            }
            Op::Mean(a) => {
                let x = val(*a);
                acc(
                    *a,
                    Tensor::filled(x.rows(), x.cols(), g.item() / x.len() as f64),
                );
            }
            Op::MaskedCrossEntropy(a, probs, picked) => {
                let scale = g.item() / picked.len() as f64;
                let mut d = Tensor::zeros(probs.rows(), probs.cols());
                for &(i, l) in picked {
                    for (o, p) in d.row_slice_mut(i).iter_mut().zip(probs.row_slice(i)) {
                        *o = scale * p;
                    }
                    let cur = d.get(i, l);
                    d.set(i, l, cur - scale);
                }
                acc(*a, d);
            }
            Op::Attention {
                q,
                k,
                v,
                scale,
                drop,
            } => {
                let (dq, dk, dv) = attention::backward(val(*q), val(*k), val(*v), *scale, *drop, g);
                acc(*q, dq);
                acc(*k, dk);
                acc(*v, dv);
            }
            Op::BasisMul(x, u, transpose) => {
                let xt = val(*x);
                let mut d = Tensor::zeros(xt.rows(), xt.cols());
                gemm(!*transpose, false, 1.0, u, g, 0.0, &mut d);
                acc(*x, d);
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::AddRow(..) => "add_row",
        Op::MulRow(..) => "mul_row",
        Op::MulCol(..) => "mul_col",
        Op::Scale(..) => "scale",
        Op::ScaleBy(..) => "scale_by",
        Op::Transpose(..) => "transpose",
        Op::ConcatCols(..) => "concat_cols",
        Op::SliceCols(..) => "slice_cols",
        Op::RowGather(..) => "row_gather",
        Op::Relu(..) => "relu",
        Op::Gelu(..) => "gelu",
        Op::Tanh(..) => "tanh",
        Op::Sin(..) => "sin",
        Op::Cos(..) => "cos",
        Op::Exp(..) => "exp",
        Op::Log(..) => "log",
        Op::SoftmaxRows(..) => "softmax_rows",
        Op::LayerNormRows(..) => "layer_norm_rows",
        Op::Dropout(..) => "dropout",
        Op::Sum(..) => "sum",
        Op::Mean(..) => "mean",
        Op::MaskedCrossEntropy(..) => "masked_cross_entropy",
        Op::Attention { .. } => "attention",
        Op::BasisMul(..) => "basis_mul",
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(g.row_slice(i)) {
            *o += v;
        }
    }
    out
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}
