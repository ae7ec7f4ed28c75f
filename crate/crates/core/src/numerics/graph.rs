//! Tape-style reverse-mode differentiation over dense matrices.
//!
//! A [`DiffGraph`] records every operation as a node holding its value and
//! the indices of its parents. Parents always precede children, so the node
//! list is a topological order: the forward pass can be replayed in place
//! (used by the finite-difference checker) and gradients are propagated by a
//! single reverse sweep.

use std::sync::Arc;

use super::matrix::{layer_norm_rows, matmul, matmul_nt, matmul_tn, row_stats, softmax_rows, Mask, Matrix};
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Constant,
    /// Trainable leaf; the payload is the caller's parameter slot.
    Param(usize),
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// Adds a `1 × cols` row to every row of the first operand.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Relu(NodeId),
    Softmax(NodeId, Option<Arc<Mask>>),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
        len: usize,
    },
    SliceRows {
        x: NodeId,
        start: usize,
        len: usize,
    },
    Sum(NodeId),
    Mean(NodeId),
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulNt(..) => "matmul_nt",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Softmax(..) => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::SliceRows { .. } => "slice_rows",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }

    pub fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul(a, b)
            | Op::MatMulNt(a, b)
            | Op::Add(a, b)
            | Op::AddRow(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::Tanh(a) | Op::Relu(a) | Op::Softmax(a, _) | Op::Sum(a) | Op::Mean(a) => vec![*a],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
            Op::SliceCols { x, .. } | Op::SliceRows { x, .. } => vec![*x],
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Op::Constant | Op::Param(_))
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
    /// True for parameters and anything downstream of one.
    requires_grad: bool,
}

/// Gradients of a scalar loss with respect to each parameter node, in the
/// order the parameters were registered.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<(NodeId, Matrix)>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.params.iter().find(|(n, _)| *n == id).map(|(_, g)| g)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DiffGraph {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
}

impl DiffGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    pub fn param_ids(&self) -> &[NodeId] {
        &self.params
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push_raw(Op::Constant, value)
    }

    /// Registers a trainable leaf. `slot` is an opaque caller-side index
    /// (e.g. the position in a parameter store).
    pub fn param(&mut self, slot: usize, value: Matrix) -> NodeId {
        let id = self.push_raw(Op::Param(slot), value);
        self.params.push(id);
        id
    }

    fn push_raw(&mut self, op: Op, value: Matrix) -> NodeId {
        let requires_grad = matches!(op, Op::Param(_)) || op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        for p in op.parents() {
            if p.0 >= self.nodes.len() {
                return Err(contract(format!("parent {} does not exist", p.0)));
            }
        }
        let value = eval(&op, &self.nodes)?;
        Ok(self.push_raw(op, value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMulNt(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.push(Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        self.push(Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(a))
    }

    pub fn softmax(&mut self, a: NodeId, mask: Option<Arc<Mask>>) -> Result<NodeId> {
        self.push(Op::Softmax(a, mask))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        self.push(Op::LayerNorm { x, gain, bias, eps })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.push(Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.push(Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.push(Op::SliceCols { x, start, len })
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.push(Op::SliceRows { x, start, len })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Mean(a))
    }

    /// Mean squared difference between two equally shaped nodes.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let d = self.sub(pred, target)?;
        let sq = self.mul(d, d)?;
        self.mean(sq)
    }

    /// Overwrites a leaf value. Downstream values are stale until
    /// [`DiffGraph::recompute`] is called.
    pub fn set_leaf_value(&mut self, id: NodeId, value: Matrix) -> Result<()> {
        let node = &mut self.nodes[id.0];
        if !node.op.is_leaf() {
            return Err(contract("only leaf values can be overwritten"));
        }
        node.value.same_shape(&value, "set_leaf_value")?;
        node.value = value;
        Ok(())
    }

    /// Re-evaluates every non-leaf node from the current leaf values.
    pub fn recompute(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            if self.nodes[i].op.is_leaf() {
                continue;
            }
            let (done, rest) = self.nodes.split_at_mut(i);
            rest[0].value = eval(&rest[0].op, done)?;
        }
        Ok(())
    }

    /// Gradient of the scalar `loss` with respect to every parameter node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(contract(format!(
                "backward needs a 1x1 loss, got {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            propagate(&node.op, &node.value, &g, &self.nodes, &mut grads)?;
            grads[i] = Some(g);
        }

        let params = self
            .params
            .iter()
            .map(|&p| {
                let g = grads
                    .get(p.0)
                    .cloned()
                    .flatten()
                    .unwrap_or_else(|| {
                        let (r, c) = self.value(p).shape();
                        Matrix::zeros(r, c)
                    });
                (p, g)
            })
            .collect();
        Ok(Gradients { params })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
    if grads.len() <= id.0 {
        return;
    }
    match &mut grads[id.0] {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn eval(op: &Op, nodes: &[Node]) -> Result<Matrix> {
    let v = |id: &NodeId| &nodes[id.0].value;
    Ok(match op {
        Op::Constant | Op::Param(_) => return Err(contract("leaf nodes are not evaluated")),
        Op::MatMul(a, b) => matmul(v(a), v(b))?,
        Op::MatMulNt(a, b) => matmul_nt(v(a), v(b))?,
        Op::Add(a, b) => v(a).add(v(b))?,
        Op::AddRow(a, r) => {
            let (x, row) = (v(a), v(r));
            if row.rows() != 1 || row.cols() != x.cols() {
                return Err(Error::Shape {
                    op: "add_row",
                    left: x.shape(),
                    right: row.shape(),
                });
            }
            let mut out = x.clone();
            for i in 0..out.rows() {
                for (o, b) in out.row_mut(i).iter_mut().zip(row.data()) {
                    *o += b;
                }
            }
            out
        }
        Op::Sub(a, b) => v(a).sub(v(b))?,
        Op::Mul(a, b) => v(a).zip_map(v(b), "mul", |x, y| x * y)?,
        Op::Scale(a, s) => v(a).scale(*s),
        Op::Tanh(a) => v(a).map(f64::tanh),
        Op::Relu(a) => v(a).map(|x| x.max(0.0)),
        Op::Softmax(a, mask) => softmax_rows(v(a), mask.as_deref())?,
        Op::LayerNorm { x, gain, bias, eps } => {
            let (g, b) = (v(gain), v(bias));
            if g.rows() != 1 || b.rows() != 1 {
                return Err(contract("layer norm gain/bias must be row vectors"));
            }
            layer_norm_rows(v(x), g.data(), b.data(), *eps)?
        }
        Op::ConcatCols(parts) => Matrix::concat_cols(&parts.iter().map(v).collect::<Vec<_>>())?,
        Op::ConcatRows(parts) => Matrix::concat_rows(&parts.iter().map(v).collect::<Vec<_>>())?,
        Op::SliceCols { x, start, len } => v(x).slice_cols(*start, *len)?,
        Op::SliceRows { x, start, len } => v(x).slice_rows(*start, *len)?,
        Op::Sum(a) => Matrix::scalar(v(a).sum()),
        Op::Mean(a) => {
            let m = v(a);
            Matrix::scalar(m.sum() / (m.rows() * m.cols()) as f64)
        }
    })
}

fn propagate(op: &Op, out: &Matrix, g: &Matrix, nodes: &[Node], grads: &mut [Option<Matrix>]) -> Result<()> {
    let v = |id: &NodeId| &nodes[id.0].value;
    let need = |id: &NodeId| nodes[id.0].requires_grad;
    match op {
        Op::Constant | Op::Param(_) => {}
        Op::MatMul(a, b) => {
            if need(a) {
                accumulate(grads, *a, matmul_nt(g, v(b))?);
            }
            if need(b) {
                accumulate(grads, *b, matmul_tn(v(a), g)?);
            }
        }
        Op::MatMulNt(a, b) => {
            if need(a) {
                accumulate(grads, *a, matmul(g, v(b))?);
            }
            if need(b) {
                accumulate(grads, *b, matmul_tn(g, v(a))?);
            }
        }
        Op::Add(a, b) => {
            accumulate(grads, *a, g.clone());
            accumulate(grads, *b, g.clone());
        }
        Op::AddRow(a, r) => {
            accumulate(grads, *a, g.clone());
            let mut col = Matrix::zeros(1, g.cols());
            for i in 0..g.rows() {
                for (c, x) in col.data_mut().iter_mut().zip(g.row(i)) {
                    *c += x;
                }
            }
            accumulate(grads, *r, col);
        }
        Op::Sub(a, b) => {
            accumulate(grads, *a, g.clone());
            accumulate(grads, *b, g.scale(-1.0));
        }
        Op::Mul(a, b) => {
            if need(a) {
                accumulate(grads, *a, g.zip_map(v(b), "mul", |x, y| x * y)?);
            }
            if need(b) {
                accumulate(grads, *b, g.zip_map(v(a), "mul", |x, y| x * y)?);
            }
        }
        Op::Scale(a, s) => accumulate(grads, *a, g.scale(*s)),
        Op::Tanh(a) => accumulate(grads, *a, g.zip_map(out, "tanh", |d, y| d * (1.0 - y * y))?),
        Op::Relu(a) => accumulate(
            grads,
            *a,
            g.zip_map(v(a), "relu", |d, x| if x > 0.0 { d } else { 0.0 })?,
        ),
        Op::Softmax(a, _) => {
            let mut dx = Matrix::zeros(out.rows(), out.cols());
            for r in 0..out.rows() {
                let (y, dy) = (out.row(r), g.row(r));
                let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                for (c, d) in dx.row_mut(r).iter_mut().enumerate() {
                    *d = y[c] * (dy[c] - dot);
                }
            }
            accumulate(grads, *a, dx);
        }
        Op::LayerNorm { x, gain, bias, eps } => {
            let xv = v(x);
            let gv = v(gain).data();
            let n = xv.cols();
            let nf = n as f64;
            let mut dx = Matrix::zeros(xv.rows(), n);
            let mut dg = Matrix::zeros(1, n);
            let mut db = Matrix::zeros(1, n);
            let mut xhat = vec![0.0; n];
            let mut dxhat = vec![0.0; n];
            for r in 0..xv.rows() {
                let row = xv.row(r);
                let (mean, inv) = row_stats(row, *eps);
                let dy = g.row(r);
                for c in 0..n {
                    xhat[c] = (row[c] - mean) * inv;
                    dxhat[c] = dy[c] * gv[c];
                    dg.data_mut()[c] += dy[c] * xhat[c];
                    db.data_mut()[c] += dy[c];
                }
                let s1: f64 = dxhat.iter().sum();
                let s2: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
                for (c, d) in dx.row_mut(r).iter_mut().enumerate() {
                    *d = inv / nf * (nf * dxhat[c] - s1 - xhat[c] * s2);
                }
            }
            accumulate(grads, *x, dx);
            accumulate(grads, *gain, dg);
            accumulate(grads, *bias, db);
        }
        Op::ConcatCols(parts) => {
            let mut off = 0;
            for p in parts {
                let w = v(p).cols();
                accumulate(grads, *p, g.slice_cols(off, w)?);
                off += w;
            }
        }
        Op::ConcatRows(parts) => {
            let mut off = 0;
            for p in parts {
                let h = v(p).rows();
                accumulate(grads, *p, g.slice_rows(off, h)?);
                off += h;
            }
        }
        Op::SliceCols { x, start, len } => {
            let (r, c) = v(x).shape();
            let mut dx = Matrix::zeros(r, c);
            for i in 0..r {
                dx.row_mut(i)[*start..start + len].copy_from_slice(g.row(i));
            }
            accumulate(grads, *x, dx);
        }
        Op::SliceRows { x, start, len } => {
            let (r, c) = v(x).shape();
            let mut dx = Matrix::zeros(r, c);
            dx.data_mut()[start * c..(start + len) * c].copy_from_slice(g.data());
            accumulate(grads, *x, dx);
        }
        Op::Sum(a) => {
            let (r, c) = v(a).shape();
            accumulate(grads, *a, Matrix::filled(r, c, g.get(0, 0)));
        }
        Op::Mean(a) => {
            let (r, c) = v(a).shape();
            accumulate(grads, *a, Matrix::filled(r, c, g.get(0, 0) / (r * c) as f64));
        }
    }
    Ok(())
}

/// Compares analytic gradients against central differences for every
/// parameter entry. Returns the largest
/// `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
///
/// The graph's leaf values are restored before returning.
pub fn grad_check(g: &mut DiffGraph, loss: NodeId, step: f64) -> Result<f64> {
    if !(1e-7..=1e-4).contains(&step) {
        return Err(contract(format!("finite-difference step {step} outside [1e-7, 1e-4]")));
    }
    let analytic = g.backward(loss)?;
    let mut worst: f64 = 0.0;
    for (pid, grad) in &analytic.params {
        let original = g.value(*pid).clone();
        for k in 0..original.data().len() {
            let mut plus = original.clone();
            plus.data_mut()[k] += step;
            g.set_leaf_value(*pid, plus)?;
            g.recompute()?;
            let fp = g.value(loss).get(0, 0);

            let mut minus = original.clone();
            minus.data_mut()[k] -= step;
            g.set_leaf_value(*pid, minus)?;
            g.recompute()?;
            let fm = g.value(loss).get(0, 0);

            let numeric = (fp - fm) / (2.0 * step);
            let a = grad.data()[k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
        g.set_leaf_value(*pid, original)?;
    }
    g.recompute()?;
    Ok(worst)
}
