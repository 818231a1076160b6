//! Trainable building blocks shared by the encoder, attention and tagger.
//!
//! Every weight matrix and bias is initialized uniformly in
//! `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.

use rand::Rng;

use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;

pub(crate) fn init_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Matrix {
    Matrix::uniform(rows, cols, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = store.add(format!("{name}.w"), init_uniform(in_dim, out_dim, in_dim, rng));
        let b = store.add(format!("{name}.b"), init_uniform(1, out_dim, in_dim, rng));
        Linear { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }
}

/// Single-direction LSTM with gate order input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let gates = 4 * hidden;
        let wx = store.add(format!("{name}.wx"), init_uniform(in_dim, gates, in_dim, rng));
        let wh = store.add(format!("{name}.wh"), init_uniform(hidden, gates, hidden, rng));
        let b = store.add(format!("{name}.b"), init_uniform(1, gates, in_dim, rng));
        Lstm { wx, wh, b, hidden }
    }

    /// Runs over the rows of `x` (`T×in`), right to left when `reverse`.
    /// Output row `t` is the hidden state after consuming input row `t`.
    pub fn forward(&self, g: &mut Graph, x: NodeId, reverse: bool) -> NodeId {
        let steps = g.shape(x).0;
        let hd = self.hidden;
        let wx = g.param(self.wx);
        let wh = g.param(self.wh);
        let b = g.param(self.b);
        let xw = g.matmul(x, wx);
        let pre = g.add_row(xw, b);
        let mut h: Option<NodeId> = None;
        let mut c: Option<NodeId> = None;
        let mut outputs = vec![None; steps];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..steps).rev())
        } else {
            Box::new(0..steps)
        };
        for t in order {
            let mut z = g.row(pre, t);
            if let Some(h) = h {
                let hw = g.matmul(h, wh);
                z = g.add(z, hw);
            }
            let i_pre = g.slice_cols(z, 0, hd);
            let f_pre = g.slice_cols(z, hd, hd);
            let c_pre = g.slice_cols(z, 2 * hd, hd);
            let o_pre = g.slice_cols(z, 3 * hd, hd);
            let i = g.sigmoid(i_pre);
            let cand = g.tanh(c_pre);
            let o = g.sigmoid(o_pre);
            let ic = g.mul(i, cand);
            let c_new = match c {
                Some(c_prev) => {
                    let f = g.sigmoid(f_pre);
                    let fc = g.mul(f, c_prev);
                    g.add(fc, ic)
                }
                None => ic,
            };
            let tc = g.tanh(c_new);
            let h_new = g.mul(o, tc);
            outputs[t] = Some(h_new);
            h = Some(h_new);
            c = Some(c_new);
        }
        let outputs: Vec<NodeId> = outputs.into_iter().map(|o| o.expect("every step ran")).collect();
        g.concat_rows(&outputs)
    }
}

/// Forward and backward LSTMs whose hidden states are concatenated per
/// position, giving `T×2H`.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: Lstm::new(store, &format!("{name}.fwd"), in_dim, hidden, rng),
            backward: Lstm::new(store, &format!("{name}.bwd"), in_dim, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let f = self.forward.forward(g, x, false);
        let b = self.backward.forward(g, x, true);
        g.concat_cols(&[f, b])
    }
}

/// Inverted-dropout mask: entries are 0 with probability `p`, otherwise
/// `1/(1-p)`.
pub fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}
