//! Reverse-mode differentiation over a per-example tape of matrix ops.
//!
//! A [`Graph`] borrows the [`ParamStore`] it reads weights from; parameter
//! leaves are created lazily, once per parameter, so every use of a weight
//! inside one forward pass accumulates into the same gradient slot.

use std::borrow::Cow;

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{log_softmax_in_place, sigmoid, softmax_in_place, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    AddCol(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    ScaleShift(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize),
    Row(NodeId, usize),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    MaxCols(NodeId, Vec<usize>),
    MaxRowGroups(NodeId, Vec<usize>),
    GatherRows(NodeId, Vec<Option<usize>>),
    PickSum(NodeId, Vec<usize>),
    SumAll(NodeId),
}

struct Node<'p> {
    value: Cow<'p, Matrix>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node<'p>>,
    param_leaves: Vec<Option<NodeId>>,
    grads: Vec<Option<Matrix>>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::with_capacity(1024),
            param_leaves: vec![None; store.len()],
            grads: Vec::new(),
        }
    }

    /// A graph with no parameters, for evaluating layer formulas on plain
    /// inputs.
    pub fn detached() -> Graph<'static> {
        Graph {
            store: None,
            nodes: Vec::new(),
            param_leaves: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Matrix>, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Matrix, op: Op, inputs: &[NodeId]) -> NodeId {
        let rg = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).shape()
    }

    pub fn constant(&mut self, m: Matrix) -> NodeId {
        self.push(Cow::Owned(m), Op::Leaf, false)
    }

    /// A leaf that receives a gradient, read back with [`Graph::grad`].
    pub fn variable(&mut self, m: Matrix) -> NodeId {
        self.push(Cow::Owned(m), Op::Leaf, true)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_leaves[id.0] {
            return n;
        }
        let store = self.store.expect("parameter used on a detached graph");
        let n = self.push(Cow::Borrowed(store.get(id)), Op::Leaf, true);
        self.param_leaves[id.0] = Some(n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.derived(v, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "add shapes");
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.derived(v, Op::Add(a, b), &[a, b])
    }

    /// Adds a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (rows, cols) = self.shape(a);
        assert_eq!(self.shape(row), (1, cols), "add_row shapes");
        let mut v = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..rows {
            for (x, b) in v.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.derived(v, Op::AddRow(a, row), &[a, row])
    }

    /// Adds an `r×1` column to every column of `a`.
    pub fn add_col(&mut self, a: NodeId, col: NodeId) -> NodeId {
        let (rows, _) = self.shape(a);
        assert_eq!(self.shape(col), (rows, 1), "add_col shapes");
        let mut v = self.value(a).clone();
        for i in 0..rows {
            let c = self.value(col).get(i, 0);
            v.row_mut(i).iter_mut().for_each(|x| *x += c);
        }
        self.derived(v, Op::AddCol(a, col), &[a, col])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "mul shapes");
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.derived(v, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies every row of `a` elementwise by a `1×c` row.
    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (rows, cols) = self.shape(a);
        assert_eq!(self.shape(row), (1, cols), "mul_row shapes");
        let mut v = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..rows {
            for (x, b) in v.row_mut(i).iter_mut().zip(&r) {
                *x *= b;
            }
        }
        self.derived(v, Op::MulRow(a, row), &[a, row])
    }

    /// `scale * a + shift`
    pub fn scale_shift(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        let v = self.value(a).map(|x| scale * x + shift);
        self.derived(v, Op::ScaleShift(a, scale), &[a])
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.scale_shift(a, -1.0, 1.0)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.derived(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.derived(v, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.derived(v, Op::Relu(a), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.rows(), rows, "concat_cols row counts");
            for i in 0..rows {
                v.row_mut(i)[offset..offset + m.cols()].copy_from_slice(m.row(i));
            }
            offset += m.cols();
        }
        self.derived(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols(), cols, "concat_rows column counts");
            data.extend_from_slice(m.data());
            rows += m.rows();
        }
        let v = Matrix::from_vec(rows, cols, data);
        self.derived(v, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let m = self.value(a);
        assert!(start + len <= m.cols(), "slice_cols out of range");
        let mut v = Matrix::zeros(m.rows(), len);
        for i in 0..m.rows() {
            v.row_mut(i).copy_from_slice(&m.row(i)[start..start + len]);
        }
        self.derived(v, Op::SliceCols(a, start), &[a])
    }

    pub fn row(&mut self, a: NodeId, r: usize) -> NodeId {
        let v = Matrix::row_vector(self.value(a).row(r).to_vec());
        self.derived(v, Op::Row(a, r), &[a])
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.derived(v, Op::Transpose(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            softmax_in_place(v.row_mut(i));
        }
        self.derived(v, Op::SoftmaxRows(a), &[a])
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            log_softmax_in_place(v.row_mut(i));
        }
        self.derived(v, Op::LogSoftmaxRows(a), &[a])
    }

    /// Per-row maximum over the columns, as an `r×1` column.
    pub fn max_cols(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let mut arg = Vec::with_capacity(m.rows());
        let mut v = Matrix::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            let (j, x) = argmax(m.row(i));
            arg.push(j);
            v.set(i, 0, x);
        }
        self.derived(v, Op::MaxCols(a, arg), &[a])
    }

    /// Per-column maximum over the rows, as a `1×c` row.
    pub fn max_rows(&mut self, a: NodeId) -> NodeId {
        let rows = self.shape(a).0;
        self.max_row_groups(a, rows)
    }

    /// Splits the rows into consecutive groups of `group` and takes the
    /// per-column maximum of each, giving `(r/group)×c`.
    pub fn max_row_groups(&mut self, a: NodeId, group: usize) -> NodeId {
        let m = self.value(a);
        let (rows, cols) = m.shape();
        assert!(group > 0 && rows % group == 0, "row count not a multiple of group");
        let out_rows = rows / group;
        let mut arg = vec![0; out_rows * cols];
        let mut v = Matrix::filled(out_rows, cols, f64::NEG_INFINITY);
        for i in 0..rows {
            let o = i / group;
            for (j, &x) in m.row(i).iter().enumerate() {
                if x > v.get(o, j) {
                    v.set(o, j, x);
                    arg[o * cols + j] = i;
                }
            }
        }
        self.derived(v, Op::MaxRowGroups(a, arg), &[a])
    }

    /// Row lookup; `None` yields a zero row.
    pub fn gather_rows(&mut self, a: NodeId, idx: Vec<Option<usize>>) -> NodeId {
        let m = self.value(a);
        let mut v = Matrix::zeros(idx.len(), m.cols());
        for (i, src) in idx.iter().enumerate() {
            if let Some(s) = src {
                v.row_mut(i).copy_from_slice(m.row(*s));
            }
        }
        self.derived(v, Op::GatherRows(a, idx), &[a])
    }

    /// `Σ_i a[i, targets[i]]` as a `1×1` matrix.
    pub fn pick_sum(&mut self, a: NodeId, targets: Vec<usize>) -> NodeId {
        let m = self.value(a);
        assert_eq!(m.rows(), targets.len(), "pick_sum target count");
        let s = targets.iter().enumerate().map(|(i, &t)| m.get(i, t)).sum();
        self.derived(Matrix::filled(1, 1, s), Op::PickSum(a, targets), &[a])
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).sum();
        self.derived(Matrix::filled(1, 1, s), Op::SumAll(a), &[a])
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "not a scalar node");
        v.get(0, 0)
    }

    /// Back-propagates from a `1×1` node whose upstream gradient is `seed`.
    pub fn backward(&mut self, output: NodeId, seed: f64) {
        assert_eq!(self.shape(output), (1, 1), "backward from non-scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::filled(1, 1, seed));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
    }

    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Adds `scale ×` every parameter gradient from the last backward pass
    /// into `out`.
    pub fn accumulate_param_grads(&self, out: &mut Gradients) {
        for (p, leaf) in self.param_leaves.iter().enumerate() {
            if let Some(g) = leaf.and_then(|n| self.grad(n)) {
                out.accumulate(ParamId(p), g);
            }
        }
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let y = &*node.value;
        let val = |id: NodeId| &*self.nodes[id.0].value;
        let wants = |id: NodeId| self.nodes[id.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    acc(grads, *a, g.matmul_nt(val(*b)));
                }
                if wants(*b) {
                    acc(grads, *b, val(*a).matmul_tn(g));
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if wants(*b) {
                    acc(grads, *b, g.clone());
                }
            }
            Op::AddRow(a, r) => {
                if wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if wants(*r) {
                    let mut s = Matrix::zeros(1, g.cols());
                    for row in g.iter_rows() {
                        for (o, x) in s.data_mut().iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                    acc(grads, *r, s);
                }
            }
            Op::AddCol(a, c) => {
                if wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if wants(*c) {
                    let s = g.iter_rows().map(|r| r.iter().sum()).collect();
                    acc(grads, *c, Matrix::from_vec(g.rows(), 1, s));
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    acc(grads, *a, g.zip_map(val(*b), |x, y| x * y));
                }
                if wants(*b) {
                    acc(grads, *b, g.zip_map(val(*a), |x, y| x * y));
                }
            }
            Op::MulRow(a, r) => {
                let rv = val(*r).data();
                if wants(*a) {
                    let mut d = g.clone();
                    for i in 0..d.rows() {
                        for (x, s) in d.row_mut(i).iter_mut().zip(rv) {
                            *x *= s;
                        }
                    }
                    acc(grads, *a, d);
                }
                if wants(*r) {
                    let av = val(*a);
                    let mut s = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for ((o, x), y) in s.data_mut().iter_mut().zip(g.row(i)).zip(av.row(i)) {
                            *o += x * y;
                        }
                    }
                    acc(grads, *r, s);
                }
            }
            Op::ScaleShift(a, s) => acc(grads, *a, g.map(|x| x * s)),
            Op::Sigmoid(a) => acc(grads, *a, g.zip_map(y, |d, y| d * y * (1.0 - y))),
            Op::Tanh(a) => acc(grads, *a, g.zip_map(y, |d, y| d * (1.0 - y * y))),
            Op::Relu(a) => acc(grads, *a, g.zip_map(val(*a), |d, x| if x > 0.0 { d } else { 0.0 })),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, cols) = val(*p).shape();
                    if wants(*p) {
                        let mut d = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        acc(grads, *p, d);
                    }
                    offset += cols;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, cols) = val(*p).shape();
                    if wants(*p) {
                        let d = Matrix::from_vec(rows, cols, g.data()[offset * cols..(offset + rows) * cols].to_vec());
                        acc(grads, *p, d);
                    }
                    offset += rows;
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(grads, *a, d);
            }
            Op::Row(a, r) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                d.row_mut(*r).copy_from_slice(g.data());
                acc(grads, *a, d);
            }
            Op::Transpose(a) => acc(grads, *a, g.transpose()),
            Op::SoftmaxRows(a) => {
                let mut d = g.clone();
                for r in 0..d.rows() {
                    let p = y.row(r);
                    let dot: f64 = g.row(r).iter().zip(p).map(|(x, p)| x * p).sum();
                    for (x, p) in d.row_mut(r).iter_mut().zip(p) {
                        *x = p * (*x - dot);
                    }
                }
                acc(grads, *a, d);
            }
            Op::LogSoftmaxRows(a) => {
                let mut d = g.clone();
                for r in 0..d.rows() {
                    let total: f64 = g.row(r).iter().sum();
                    for (x, lp) in d.row_mut(r).iter_mut().zip(y.row(r)) {
                        *x -= lp.exp() * total;
                    }
                }
                acc(grads, *a, d);
            }
            Op::MaxCols(a, arg) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                for (r, &j) in arg.iter().enumerate() {
                    d.set(r, j, g.get(r, 0));
                }
                acc(grads, *a, d);
            }
            Op::MaxRowGroups(a, arg) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                for (k, &i) in arg.iter().enumerate() {
                    let c = k % cols;
                    d.set(i, c, g.data()[k]);
                }
                acc(grads, *a, d);
            }
            Op::GatherRows(a, idx) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                for (i, src) in idx.iter().enumerate() {
                    if let Some(s) = src {
                        for (o, x) in d.row_mut(*s).iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                }
                acc(grads, *a, d);
            }
            Op::PickSum(a, targets) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                let s = g.get(0, 0);
                for (i, &t) in targets.iter().enumerate() {
                    d.set(i, t, s);
                }
                acc(grads, *a, d);
            }
            Op::SumAll(a) => {
                let (rows, cols) = val(*a).shape();
                acc(grads, *a, Matrix::filled(rows, cols, g.get(0, 0)));
            }
        }
    }
}

fn acc(grads: &mut [Option<Matrix>], id: NodeId, d: Matrix) {
    match &mut grads[id.0] {
        Some(g) => g.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

/// First index of the maximum; NaN never wins.
fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &x) in row.iter().enumerate() {
        if x > best.1 {
            best = (j, x);
        }
    }
    best
}
