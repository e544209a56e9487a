//! Reverse-mode differentiation over a dynamically recorded tape.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its output value. [`Tape::backward`] walks the nodes in reverse, pushing
//! adjoints to their inputs, and finally deposits the adjoint of every
//! parameter leaf into the [`ParameterStore`] it came from. Tapes are built
//! per batch and thrown away.
//!
//! Everything is 2-D here: tensors of other ranks are rejected by the ops
//! that care about rows and columns.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::tensor::{gemm, gemm_raw, MatRef};
use crate::numerics::{ParameterStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            // subgradient 0 at the kink
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    MatMul {
        a: Var,
        b: Var,
        trans_b: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRowBias {
        x: Var,
        bias: Var,
    },
    Affine {
        x: Var,
        scale: f64,
    },
    Activate {
        x: Var,
        act: Activation,
    },
    ConcatCols(Vec<Var>),
    /// `exp(e_ij) / (s_i + Σ_o exp(e_io))`; `inv_z` caches `1/(s_i + Σ exp)`.
    SentinelSoftmax {
        e: Var,
        s: Option<Var>,
        inv_z: Vec<f64>,
    },
    GraphConv {
        adj: Var,
        z: Var,
    },
    TileRows {
        x: Var,
        times: usize,
    },
    RepeatRows {
        x: Var,
        times: usize,
    },
    ScaleRowsByCol {
        h: Var,
        weights: Var,
        col: usize,
    },
    SumAll(Var),
    L1Loss {
        pred: Var,
        target: Tensor,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::AddRowBias { x, bias } => vec![*x, *bias],
            Op::Affine { x, .. }
            | Op::Activate { x, .. }
            | Op::TileRows { x, .. }
            | Op::RepeatRows { x, .. } => vec![*x],
            Op::ConcatCols(parts) => parts.clone(),
            Op::SentinelSoftmax { e, s, .. } => std::iter::once(*e).chain(*s).collect(),
            Op::GraphConv { adj, z } => vec![*adj, *z],
            Op::ScaleRowsByCol { h, weights, .. } => vec![*h, *weights],
            Op::SumAll(x) | Op::L1Loss { pred: x, .. } => vec![*x],
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    /// Depends on at least one parameter, so its adjoint is needed.
    live: bool,
}

/// Records a forward computation for later reverse accumulation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::dim(op, t.shape(), &[]));
    }
    Ok(())
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let live = matches!(op, Op::Param(_)) || op.inputs().iter().any(|v| self.nodes[v.0].live);
        self.nodes.push(Node { value, op, live });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf for a stored parameter. Repeated requests for the same path
    /// return the same node so that its adjoint is accumulated once.
    pub fn param(&mut self, store: &ParameterStore, path: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(path) {
            return Ok(v);
        }
        let value = store.get(path)?.clone();
        let v = self.push(value, Op::Param(path.to_string()));
        self.params.insert(path.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = gemm(self.value(a), false, self.value(b), false)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                b,
                trans_b: false,
            },
        ))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = gemm(self.value(a), false, self.value(b), true)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                b,
                trans_b: true,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self
            .value(a)
            .zip_map(self.value(b), "hadamard", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Adds a `1 × n` row vector to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        require_matrix("add_row_bias", xv)?;
        if bv.shape() != [1, xv.cols()] {
            return Err(Error::dim("add_row_bias", xv.shape(), bv.shape()));
        }
        let mut value = xv.clone();
        let c = xv.cols();
        for row in value.data_mut().chunks_mut(c.max(1)) {
            for (y, b) in row.iter_mut().zip(bv.data()) {
                *y += b;
            }
        }
        Ok(self.push(value, Op::AddRowBias { x, bias }))
    }

    /// `scale·x + shift`, with the shift a constant.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push(value, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        let value = self.value(x).map(|v| act.apply(v));
        self.push(value, Op::Activate { x, act })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Relu)
    }

    /// Concatenates along the last axis; all row counts must agree.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let rows = self.value(*first).rows();
        for p in parts {
            let t = self.value(*p);
            require_matrix("concat", t)?;
            if t.rows() != rows {
                return Err(Error::dim("concat", self.value(*first).shape(), t.shape()));
            }
        }
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    pub fn row_softmax(&mut self, e: Var) -> Result<Var> {
        self.sentinel_softmax_impl(e, None)
    }

    /// Row normalisation `exp(e_ij) / (s_i + Σ_o exp(e_io))` with `s` an
    /// `m × 1` column of non-negative sentinels.
    pub fn sentinel_softmax(&mut self, e: Var, s: Var) -> Result<Var> {
        self.sentinel_softmax_impl(e, Some(s))
    }

    fn sentinel_softmax_impl(&mut self, e: Var, s: Option<Var>) -> Result<Var> {
        let ev = self.value(e);
        require_matrix("softmax", ev)?;
        let (m, n) = (ev.rows(), ev.cols());
        if let Some(s) = s {
            let sv = self.value(s);
            if sv.shape() != [m, 1] {
                return Err(Error::dim("sentinel_softmax", ev.shape(), sv.shape()));
            }
        }
        let mut out = Tensor::zeros(&[m, n]);
        let mut inv_z = vec![0.0; m];
        for i in 0..m {
            let row = ev.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shift = if max.is_finite() { max } else { 0.0 };
            let mut denom = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let ex = (x - shift).exp();
                out.set(i, j, ex);
                denom += ex;
            }
            let sentinel = s.map_or(0.0, |s| self.value(s).get(i, 0));
            let scaled_s = sentinel * (-shift).exp();
            denom += scaled_s;
            for j in 0..n {
                out.set(i, j, out.get(i, j) / denom);
            }
            inv_z[i] = (-shift).exp() / denom;
        }
        Ok(self.push(out, Op::SentinelSoftmax { e, s, inv_z }))
    }

    /// Applies an `n × n` adjacency to each consecutive `n`-row block of `z`.
    pub fn graph_conv(&mut self, adj: Var, z: Var) -> Result<Var> {
        let (av, zv) = (self.value(adj), self.value(z));
        require_matrix("graph_conv", av)?;
        require_matrix("graph_conv", zv)?;
        let n = av.rows();
        if av.cols() != n || n == 0 || zv.rows() % n != 0 {
            return Err(Error::dim("graph_conv", av.shape(), zv.shape()));
        }
        let f = zv.cols();
        let blocks = zv.rows() / n;
        let mut out = Tensor::zeros(&[zv.rows(), f]);
        for b in 0..blocks {
            let zb = &zv.data()[b * n * f..(b + 1) * n * f];
            let ob = &mut out.data_mut()[b * n * f..(b + 1) * n * f];
            gemm_raw(
                MatRef::new(av.data(), n, n, false),
                MatRef::new(zb, n, f, false),
                0.0,
                ob,
            );
        }
        Ok(self.push(out, Op::GraphConv { adj, z }))
    }

    /// Stacks `times` copies of `x` vertically.
    pub fn tile_rows(&mut self, x: Var, times: usize) -> Var {
        let xv = self.value(x);
        let mut data = Vec::with_capacity(xv.len() * times);
        for _ in 0..times {
            data.extend_from_slice(xv.data());
        }
        let value = Tensor::new(vec![xv.rows() * times, xv.cols()], data).expect("tile shape");
        self.push(value, Op::TileRows { x, times })
    }

    /// Repeats each row of `x` `times` times consecutively.
    pub fn repeat_rows(&mut self, x: Var, times: usize) -> Var {
        let xv = self.value(x);
        let mut data = Vec::with_capacity(xv.len() * times);
        for r in 0..xv.rows() {
            for _ in 0..times {
                data.extend_from_slice(xv.row(r));
            }
        }
        let value = Tensor::new(vec![xv.rows() * times, xv.cols()], data).expect("repeat shape");
        self.push(value, Op::RepeatRows { x, times })
    }

    /// Multiplies row `r` of `h` by `weights[r, col]`.
    pub fn scale_rows_by_col(&mut self, h: Var, weights: Var, col: usize) -> Result<Var> {
        let (hv, wv) = (self.value(h), self.value(weights));
        if hv.rows() != wv.rows() || col >= wv.cols() {
            return Err(Error::dim("scale_rows_by_col", hv.shape(), wv.shape()));
        }
        let c = hv.cols();
        let mut value = hv.clone();
        for (r, row) in value.data_mut().chunks_mut(c.max(1)).enumerate() {
            let w = wv.get(r, col);
            row.iter_mut().for_each(|x| *x *= w);
        }
        Ok(self.push(value, Op::ScaleRowsByCol { h, weights, col }))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::SumAll(x))
    }

    /// Mean absolute deviation between `pred` and a fixed target.
    pub fn l1_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(Error::dim("l1_loss", pv.shape(), target.shape()));
        }
        let count = pv.len().max(1) as f64;
        let total: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, y)| (y - p).abs())
            .sum();
        Ok(self.push(
            Tensor::scalar(total / count),
            Op::L1Loss {
                pred,
                target: target.clone(),
            },
        ))
    }

    /// Reverse accumulation from a scalar `loss`. Every slot of `store` is
    /// overwritten: parameters that did not take part get a zero gradient.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<()> {
        let adjoints = self.adjoints(loss)?;
        store.zero_grad();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(path), Some(g)) = (&node.op, &adjoints[idx]) {
                if let Some(slot) = store.grad_mut(path) {
                    slot.add_assign(g);
                }
            }
        }
        Ok(())
    }

    /// Adjoints of the parameter leaves with respect to the scalar `loss`,
    /// indexed by node; every other entry is `None`.
    pub fn adjoints(&self, loss: Var) -> Result<Vec<Option<Tensor>>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            if matches!(node.op, Op::Param(_)) {
                grads[idx] = Some(g);
            }
        }
        Ok(grads)
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let live = |v: Var| self.nodes[v.0].live;
        let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul { a, b, trans_b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if *trans_b {
                    // C = A Bᵀ
                    if live(*a) {
                        acc(*a, gemm(g, false, bv, false).expect("matmul adjoint"));
                    }
                    if live(*b) {
                        acc(*b, gemm(g, true, av, false).expect("matmul adjoint"));
                    }
                } else {
                    if live(*a) {
                        acc(*a, gemm(g, false, bv, true).expect("matmul adjoint"));
                    }
                    if live(*b) {
                        acc(*b, gemm(av, true, g, false).expect("matmul adjoint"));
                    }
                }
            }
            Op::Add(a, b) => {
                if live(*a) {
                    acc(*a, g.clone());
                }
                if live(*b) {
                    acc(*b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if live(*a) {
                    acc(*a, g.clone());
                }
                if live(*b) {
                    acc(*b, g.map(|x| -x));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if live(*a) {
                    acc(
                        *a,
                        g.zip_map(bv, "hadamard", |x, y| x * y).expect("same shape"),
                    );
                }
                if live(*b) {
                    acc(
                        *b,
                        g.zip_map(av, "hadamard", |x, y| x * y).expect("same shape"),
                    );
                }
            }
            Op::AddRowBias { x, bias } => {
                if live(*x) {
                    acc(*x, g.clone());
                }
                let c = g.cols();
                let mut db = Tensor::zeros(&[1, c]);
                for row in g.data().chunks(c.max(1)) {
                    for (d, v) in db.data_mut().iter_mut().zip(row) {
                        *d += v;
                    }
                }
                if live(*bias) {
                    acc(*bias, db);
                }
            }
            Op::Affine { x, scale } => acc(*x, g.map(|v| v * scale)),
            Op::Activate { x, act } => {
                let d = g
                    .zip_map(&node.value, "activation", |gv, y| gv * act.derivative(y))
                    .expect("same shape");
                if live(*x) {
                    acc(*x, d);
                }
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for p in parts {
                    let c = self.value(*p).cols();
                    if live(*p) {
                        acc(*p, Tensor::from_fn(rows, c, |r, j| g.get(r, offset + j)));
                    }
                    offset += c;
                }
            }
            Op::SentinelSoftmax { e, s, inv_z } => {
                let a = &node.value;
                let (m, n) = (a.rows(), a.cols());
                let mut de = Tensor::zeros(&[m, n]);
                let mut ds = Tensor::zeros(&[m, 1]);
                for i in 0..m {
                    let dot: f64 = a.row(i).iter().zip(g.row(i)).map(|(x, y)| x * y).sum();
                    for j in 0..n {
                        de.set(i, j, a.get(i, j) * (g.get(i, j) - dot));
                    }
                    ds.set(i, 0, -dot * inv_z[i]);
                }
                if live(*e) {
                    acc(*e, de);
                }
                if let Some(s) = s {
                    if live(*s) {
                        acc(*s, ds);
                    }
                }
            }
            Op::GraphConv { adj, z } => {
                let (av, zv) = (self.value(*adj), self.value(*z));
                let n = av.rows();
                let f = zv.cols();
                let blocks = zv.rows() / n;
                if live(*z) {
                    let mut dz = Tensor::zeros(zv.shape());
                    for b in 0..blocks {
                        let range = b * n * f..(b + 1) * n * f;
                        let gb = &g.data()[range.clone()];
                        gemm_raw(
                            MatRef::new(av.data(), n, n, true),
                            MatRef::new(gb, n, f, false),
                            0.0,
                            &mut dz.data_mut()[range],
                        );
                    }
                    acc(*z, dz);
                }
                if live(*adj) {
                    let mut da = Tensor::zeros(&[n, n]);
                    for b in 0..blocks {
                        let range = b * n * f..(b + 1) * n * f;
                        let gb = &g.data()[range.clone()];
                        let zb = &zv.data()[range];
                        gemm_raw(
                            MatRef::new(gb, n, f, false),
                            MatRef::new(zb, n, f, true),
                            1.0,
                            da.data_mut(),
                        );
                    }
                    acc(*adj, da);
                }
            }
            Op::TileRows { x, times } => {
                let xv = self.value(*x);
                let block = xv.len();
                let mut d = Tensor::zeros(xv.shape());
                for t in 0..*times {
                    for (dst, src) in d
                        .data_mut()
                        .iter_mut()
                        .zip(&g.data()[t * block..(t + 1) * block])
                    {
                        *dst += src;
                    }
                }
                if live(*x) {
                    acc(*x, d);
                }
            }
            Op::RepeatRows { x, times } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut d = Tensor::zeros(xv.shape());
                for r in 0..xv.rows() {
                    for t in 0..*times {
                        let src = g.row(r * times + t);
                        for (j, v) in src.iter().enumerate() {
                            d.data_mut()[r * c + j] += v;
                        }
                    }
                }
                if live(*x) {
                    acc(*x, d);
                }
            }
            Op::ScaleRowsByCol { h, weights, col } => {
                let (hv, wv) = (self.value(*h), self.value(*weights));
                let c = hv.cols();
                let mut dh = g.clone();
                let mut dw = Tensor::zeros(wv.shape());
                for r in 0..hv.rows() {
                    let w = wv.get(r, *col);
                    let row = &mut dh.data_mut()[r * c..(r + 1) * c];
                    row.iter_mut().for_each(|x| *x *= w);
                    let dot: f64 = g.row(r).iter().zip(hv.row(r)).map(|(a, b)| a * b).sum();
                    dw.set(r, *col, dot);
                }
                if live(*h) {
                    acc(*h, dh);
                }
                if live(*weights) {
                    acc(*weights, dw);
                }
            }
            Op::SumAll(x) => {
                let gv = g.data()[0];
                if live(*x) {
                    acc(*x, Tensor::full(self.value(*x).shape(), gv));
                }
            }
            Op::L1Loss { pred, target } => {
                let pv = self.value(*pred);
                let scale = g.data()[0] / pv.len().max(1) as f64;
                let d = pv
                    .zip_map(target, "l1", |p, y| {
                        let diff = p - y;
                        if diff > 0.0 {
                            scale
                        } else if diff < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    })
                    .expect("same shape");
                if live(*pred) {
                    acc(*pred, d);
                }
            }
        }
    }
}
