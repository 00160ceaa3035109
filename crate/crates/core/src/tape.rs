//! Reverse-mode automatic differentiation over a flat op arena.
//!
//! A [`Tape`] records every intermediate tensor of a forward computation as
//! a node indexed by [`ValueId`]. Nodes refer to their inputs by id, so the
//! graph is implicit in creation order and `backward` is a single reverse
//! sweep. Gradients are accumulated per node; a node participates in the
//! sweep only if some leaf under it was registered with `requires_grad`.
//!
//! The tape owns copies of its leaf tensors. Training records a whole
//! batch on one tape, runs `backward` once, reads gradients off, and
//! drops the tape.

use alloc::vec::Vec;

use crate::mathx;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that
/// created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

enum Op {
    Leaf,
    /// a @ b
    Matmul(ValueId, ValueId),
    /// a @ b^T
    MatmulTB(ValueId, ValueId),
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    Scale(ValueId, f64),
    /// a[n,m] + row[1,m], broadcast down the rows.
    AddRow(ValueId, ValueId),
    /// a[n,m] * col[n,1], broadcast across the columns.
    MulCol(ValueId, ValueId),
    Relu(ValueId),
    Sigmoid(ValueId),
    SoftmaxRows(ValueId),
    LayerNorm {
        a: ValueId,
        gain: ValueId,
        bias: ValueId,
        /// Normalized input, saved for the backward pass.
        xhat: Tensor,
        /// Per-row 1/sqrt(var + eps).
        rstd: Vec<f64>,
    },
    /// Row selection; duplicate indices accumulate gradient, which makes
    /// this double as embedding lookup.
    Gather(ValueId, Vec<usize>),
    SliceCols {
        a: ValueId,
        start: usize,
    },
    ConcatCols(Vec<ValueId>),
    Sum(ValueId),
    /// Label-smoothed cross entropy, summed over the rows where `include`
    /// is true. The smoothed target spreads `smoothing` uniformly over the
    /// whole vocabulary (target class included).
    SmoothedCeSum {
        logits: ValueId,
        targets: Vec<usize>,
        include: Vec<bool>,
        smoothing: f64,
        /// Row-softmax of the logits, saved for the backward pass.
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
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

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Forget every node from `len` on. Handles into the removed region
    /// become invalid; the caller promises not to use them again.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.grads.truncate(len);
    }

    /// Gradient of the last `backward` root with respect to `id`, if the
    /// node participated.
    pub fn grad(&self, id: ValueId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> ValueId {
        debug_assert!(value.is_finite(), "non-finite values entering tape node {}", self.nodes.len());
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        ValueId(self.nodes.len() - 1)
    }

    fn requires(&self, id: ValueId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> ValueId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> ValueId {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let value = self.value(a).matmul(self.value(b));
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Matmul(a, b), req)
    }

    /// `a @ b^T`; used for attention scores and the tied output projection.
    pub fn matmul_tb(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let value = self.value(a).matmul_tb(self.value(b));
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::MatmulTB(a, b), req)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "add [{}x{}] + [{}x{}]",
            ta.rows(),
            ta.cols(),
            tb.rows(),
            tb.cols()
        );
        let mut value = ta.clone();
        value.add_assign(tb);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Add(a, b), req)
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "sub [{}x{}] - [{}x{}]",
            ta.rows(),
            ta.cols(),
            tb.rows(),
            tb.cols()
        );
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Sub(a, b), req)
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "mul [{}x{}] * [{}x{}]",
            ta.rows(),
            ta.cols(),
            tb.rows(),
            tb.cols()
        );
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Mul(a, b), req)
    }

    pub fn scale(&mut self, a: ValueId, k: f64) -> ValueId {
        let value = self.value(a).map(|v| v * k);
        let req = self.requires(a);
        self.push(value, Op::Scale(a, k), req)
    }

    pub fn add_row(&mut self, a: ValueId, row: ValueId) -> ValueId {
        let (ta, tr) = (self.value(a), self.value(row));
        assert!(
            tr.rows() == 1 && tr.cols() == ta.cols(),
            "add_row [{}x{}] + [{}x{}]",
            ta.rows(),
            ta.cols(),
            tr.rows(),
            tr.cols()
        );
        let mut value = ta.clone();
        for i in 0..value.rows() {
            for j in 0..value.cols() {
                let v = value.at(i, j) + tr.at(0, j);
                value.set(i, j, v);
            }
        }
        let req = self.requires(a) || self.requires(row);
        self.push(value, Op::AddRow(a, row), req)
    }

    pub fn mul_col(&mut self, a: ValueId, col: ValueId) -> ValueId {
        let (ta, tc) = (self.value(a), self.value(col));
        assert!(
            tc.cols() == 1 && tc.rows() == ta.rows(),
            "mul_col [{}x{}] * [{}x{}]",
            ta.rows(),
            ta.cols(),
            tc.rows(),
            tc.cols()
        );
        let mut value = ta.clone();
        for i in 0..value.rows() {
            let c = tc.at(i, 0);
            for v in value.row_mut(i) {
                *v *= c;
            }
        }
        let req = self.requires(a) || self.requires(col);
        self.push(value, Op::MulCol(a, col), req)
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        let req = self.requires(a);
        self.push(value, Op::Relu(a), req)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).map(|v| {
            if v >= 0.0 {
                1.0 / (1.0 + mathx::exp(-v))
            } else {
                let e = mathx::exp(v);
                e / (1.0 + e)
            }
        });
        let req = self.requires(a);
        self.push(value, Op::Sigmoid(a), req)
    }

    /// Row-wise softmax with max subtraction. Entries pushed below roughly
    /// -700 relative to their row maximum underflow to exactly 0.
    pub fn softmax_rows(&mut self, a: ValueId) -> ValueId {
        let ta = self.value(a);
        let mut value = Tensor::zeros(ta.rows(), ta.cols());
        for i in 0..ta.rows() {
            softmax_into(ta.row(i), value.row_mut(i));
        }
        let req = self.requires(a);
        self.push(value, Op::SoftmaxRows(a), req)
    }

    /// Row-wise layer normalization with affine gain and bias (each [1,m]).
    pub fn layer_norm(&mut self, a: ValueId, gain: ValueId, bias: ValueId, eps: f64) -> ValueId {
        let (ta, tg, tb) = (self.value(a), self.value(gain), self.value(bias));
        let (n, m) = ta.shape();
        assert!(
            tg.shape() == (1, m) && tb.shape() == (1, m),
            "layer_norm [{n}x{m}] with gain [{}x{}] bias [{}x{}]",
            tg.rows(),
            tg.cols(),
            tb.rows(),
            tb.cols()
        );
        assert!(m > 0, "layer_norm over empty rows");
        let mut xhat = Tensor::zeros(n, m);
        let mut rstd = Vec::with_capacity(n);
        let mut value = Tensor::zeros(n, m);
        for i in 0..n {
            let row = ta.row(i);
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let r = 1.0 / mathx::sqrt(var + eps);
            rstd.push(r);
            for j in 0..m {
                let h = (row[j] - mean) * r;
                xhat.set(i, j, h);
                value.set(i, j, tg.at(0, j) * h + tb.at(0, j));
            }
        }
        let req = self.requires(a) || self.requires(gain) || self.requires(bias);
        self.push(value, Op::LayerNorm { a, gain, bias, xhat, rstd }, req)
    }

    pub fn gather(&mut self, a: ValueId, rows: Vec<usize>) -> ValueId {
        let ta = self.value(a);
        let mut value = Tensor::zeros(rows.len(), ta.cols());
        for (out, &src) in rows.iter().enumerate() {
            assert!(src < ta.rows(), "gather row {src} from [{}x{}]", ta.rows(), ta.cols());
            value.row_mut(out).copy_from_slice(ta.row(src));
        }
        let req = self.requires(a);
        self.push(value, Op::Gather(a, rows), req)
    }

    pub fn slice_cols(&mut self, a: ValueId, start: usize, len: usize) -> ValueId {
        let ta = self.value(a);
        assert!(
            start + len <= ta.cols(),
            "slice_cols {start}..{} of [{}x{}]",
            start + len,
            ta.rows(),
            ta.cols()
        );
        let mut value = Tensor::zeros(ta.rows(), len);
        for i in 0..ta.rows() {
            value.row_mut(i).copy_from_slice(&ta.row(i)[start..start + len]);
        }
        let req = self.requires(a);
        self.push(value, Op::SliceCols { a, start }, req)
    }

    pub fn concat_cols(&mut self, parts: &[ValueId]) -> ValueId {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let n = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Tensor::zeros(n, total);
        let mut offset = 0;
        for &p in parts {
            let tp = self.value(p);
            assert_eq!(tp.rows(), n, "concat_cols rows {} vs {n}", tp.rows());
            for i in 0..n {
                value.row_mut(i)[offset..offset + tp.cols()].copy_from_slice(tp.row(i));
            }
            offset += tp.cols();
        }
        let req = parts.iter().any(|&p| self.requires(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), req)
    }

    /// Sum of all entries, as a [1,1] tensor.
    pub fn sum(&mut self, a: ValueId) -> ValueId {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        let req = self.requires(a);
        self.push(value, Op::Sum(a), req)
    }

    /// Label-smoothed cross entropy summed over the rows with `include`
    /// set. For smoothing `eps` over vocabulary size `V`, the target
    /// distribution of a row with class `t` is
    /// `q(v) = (1 - eps) * [v == t] + eps / V`.
    pub fn smoothed_ce_sum(
        &mut self,
        logits: ValueId,
        targets: &[usize],
        include: &[bool],
        smoothing: f64,
    ) -> ValueId {
        let tl = self.value(logits);
        let (n, vocab) = tl.shape();
        assert_eq!(targets.len(), n, "smoothed_ce_sum: {} targets for [{n}x{vocab}] logits", targets.len());
        assert_eq!(include.len(), n, "smoothed_ce_sum: {} include flags for {n} rows", include.len());
        assert!((0.0..1.0).contains(&smoothing), "smoothing {smoothing} outside [0,1)");
        let mut probs = Tensor::zeros(n, vocab);
        let mut total = 0.0;
        for i in 0..n {
            let row = tl.row(i);
            softmax_into(row, probs.row_mut(i));
            if !include[i] {
                continue;
            }
            let t = targets[i];
            assert!(t < vocab, "target {t} outside vocabulary of {vocab}");
            // -sum_v q(v) log p(v), written against log-softmax directly so
            // underflowed probabilities cannot produce log(0).
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logz = mathx::ln(row.iter().map(|&v| mathx::exp(v - max)).sum::<f64>()) + max;
            let uniform = smoothing / vocab as f64;
            let mut loss = 0.0;
            for (v, &logit) in row.iter().enumerate() {
                let q = if v == t { 1.0 - smoothing + uniform } else { uniform };
                loss -= q * (logit - logz);
            }
            total += loss;
        }
        let value = Tensor::scalar(total);
        let req = self.requires(logits);
        self.push(
            value,
            Op::SmoothedCeSum {
                logits,
                targets: targets.to_vec(),
                include: include.to_vec(),
                smoothing,
                probs,
            },
            req,
        )
    }

    /// Reverse sweep from a [1,1] root, seeding its gradient with `seed`.
    /// Previous gradients on the tape are cleared first.
    pub fn backward_with_seed(&mut self, root: ValueId, seed: f64) {
        let shape = self.value(root).shape();
        assert_eq!(shape, (1, 1), "backward root must be scalar, got [{}x{}]", shape.0, shape.1);
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[root.0] = Some(Tensor::scalar(seed));
        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
    }

    pub fn backward(&mut self, root: ValueId) {
        self.backward_with_seed(root, 1.0);
    }

    fn accumulate(&mut self, id: ValueId, delta: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        // The op is moved out so parents can be mutated; Leaf has no
        // parents and is put back unchanged.
        let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let da = g.matmul_tb(self.value(*b));
                let db = self.value(*a).matmul_ta(g);
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::MatmulTB(a, b) => {
                let da = g.matmul(self.value(*b));
                let db = g.matmul_ta(self.value(*a));
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::Add(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let da = hadamard(g, self.value(*b));
                let db = hadamard(g, self.value(*a));
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::Scale(a, k) => {
                self.accumulate(*a, g.map(|v| v * k));
            }
            Op::AddRow(a, row) => {
                let mut drow = Tensor::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        let v = drow.at(0, j) + g.at(i, j);
                        drow.set(0, j, v);
                    }
                }
                self.accumulate(*a, g.clone());
                self.accumulate(*row, drow);
            }
            Op::MulCol(a, col) => {
                let tc = self.value(*col);
                let ta = self.value(*a);
                let mut da = g.clone();
                for i in 0..da.rows() {
                    let c = tc.at(i, 0);
                    for v in da.row_mut(i) {
                        *v *= c;
                    }
                }
                let mut dcol = Tensor::zeros(g.rows(), 1);
                for i in 0..g.rows() {
                    let dot: f64 = g.row(i).iter().zip(ta.row(i)).map(|(x, y)| x * y).sum();
                    dcol.set(i, 0, dot);
                }
                self.accumulate(*a, da);
                self.accumulate(*col, dcol);
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                let data = g.data().iter().zip(ta.data()).map(|(&gv, &av)| if av > 0.0 { gv } else { 0.0 }).collect();
                self.accumulate(*a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[i].value;
                let data = g.data().iter().zip(y.data()).map(|(&gv, &yv)| gv * yv * (1.0 - yv)).collect();
                self.accumulate(*a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let mut da = Tensor::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(x, p)| x * p).sum();
                    for c in 0..g.cols() {
                        da.set(r, c, y.at(r, c) * (g.at(r, c) - dot));
                    }
                }
                self.accumulate(*a, da);
            }
            Op::LayerNorm { a, gain, bias, xhat, rstd } => {
                let (n, m) = g.shape();
                let tg = self.value(*gain);
                let mut dgain = Tensor::zeros(1, m);
                let mut dbias = Tensor::zeros(1, m);
                let mut da = Tensor::zeros(n, m);
                for r in 0..n {
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for c in 0..m {
                        let dxhat = g.at(r, c) * tg.at(0, c);
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat.at(r, c);
                        dgain.set(0, c, dgain.at(0, c) + g.at(r, c) * xhat.at(r, c));
                        dbias.set(0, c, dbias.at(0, c) + g.at(r, c));
                    }
                    let inv_m = 1.0 / m as f64;
                    for c in 0..m {
                        let dxhat = g.at(r, c) * tg.at(0, c);
                        let v = rstd[r] * (dxhat - inv_m * sum_dxhat - xhat.at(r, c) * inv_m * sum_dxhat_xhat);
                        da.set(r, c, v);
                    }
                }
                self.accumulate(*a, da);
                self.accumulate(*gain, dgain);
                self.accumulate(*bias, dbias);
            }
            Op::Gather(a, rows) => {
                let ta = self.value(*a);
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                for (out, &src) in rows.iter().enumerate() {
                    for j in 0..g.cols() {
                        let v = da.at(src, j) + g.at(out, j);
                        da.set(src, j, v);
                    }
                }
                self.accumulate(*a, da);
            }
            Op::SliceCols { a, start } => {
                let ta = self.value(*a);
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                for i in 0..g.rows() {
                    da.row_mut(i)[*start..start + g.cols()].copy_from_slice(g.row(i));
                }
                self.accumulate(*a, da);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut dp = Tensor::zeros(g.rows(), w);
                    for i in 0..g.rows() {
                        dp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + w]);
                    }
                    offset += w;
                    self.accumulate(p, dp);
                }
            }
            Op::Sum(a) => {
                let ta = self.value(*a);
                self.accumulate(*a, Tensor::filled(ta.rows(), ta.cols(), g.item()));
            }
            Op::SmoothedCeSum { logits, targets, include, smoothing, probs } => {
                let seed = g.item();
                let (n, vocab) = probs.shape();
                let uniform = smoothing / vocab as f64;
                let mut dl = Tensor::zeros(n, vocab);
                for r in 0..n {
                    if !include[r] {
                        continue;
                    }
                    for c in 0..vocab {
                        let q = if c == targets[r] { 1.0 - smoothing + uniform } else { uniform };
                        dl.set(r, c, seed * (probs.at(r, c) - q));
                    }
                }
                self.accumulate(*logits, dl);
            }
        }
        self.nodes[i].op = op;
    }
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        let e = mathx::exp(v - max);
        *o = e;
        z += e;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::from_vec(a.rows(), a.cols(), data)
}
