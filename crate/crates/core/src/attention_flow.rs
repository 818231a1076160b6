//! Attention flow between two sequences `S_a` (`L×D`, the retained axis) and
//! `S_b` (`K×D`).
//!
//! ```text
//! H[i,j]  = w0 · [a_i ; b_j ; a_i ∘ b_j]
//! α_i     = softmax(H[i,:])            S̃_b[i] = Σ_j α_ij b_j
//! β       = softmax(max_j H[:,j])      s̃_a    = Σ_i β_i a_i
//! U[i]    = [a_i ; S̃_b[i] ; a_i ∘ S̃_b[i] ; a_i ∘ s̃_a]      (4D per row)
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::init_uniform;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;

/// Trainable `1×3D` similarity weight.
#[derive(Clone, Debug)]
pub struct AttentionFlowLayer {
    pub w0: ParamId,
    pub dim: usize,
}

impl AttentionFlowLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        let w0 = store.add(format!("{name}.w0"), init_uniform(1, 3 * dim, 3 * dim, rng));
        AttentionFlowLayer { w0, dim }
    }

    pub fn forward(&self, g: &mut Graph, s_a: NodeId, s_b: NodeId) -> Result<FusionNodes> {
        let w0 = g.param(self.w0);
        fuse_nodes(g, s_a, s_b, w0, None)
    }
}

/// Graph handles for every intermediate of one fusion.
#[derive(Clone, Copy, Debug)]
pub struct FusionNodes {
    /// `L×4D`
    pub u: NodeId,
    /// `L×K`
    pub h: NodeId,
    /// `L×K`, row-stochastic
    pub a: NodeId,
    /// `1×L`
    pub b: NodeId,
    /// `L×D`
    pub s_b_tilde: NodeId,
    /// `1×D`
    pub s_a_tilde: NodeId,
}

/// Valid (unpadded) lengths of the two inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidLengths {
    pub a: usize,
    pub b: usize,
}

fn check_shapes(g: &Graph, s_a: NodeId, s_b: NodeId, w0: NodeId) -> Result<usize> {
    let (l, d) = g.shape(s_a);
    let (k, d_b) = g.shape(s_b);
    if d != d_b {
        return Err(Error::Shape(format!("S_a width {d} differs from S_b width {d_b}")));
    }
    if l == 0 || k == 0 {
        return Err(Error::Shape("attention flow over an empty sequence".into()));
    }
    if g.shape(w0) != (1, 3 * d) {
        let (r, c) = g.shape(w0);
        return Err(Error::Shape(format!("w0 is {r}x{c}, expected 1x{}", 3 * d)));
    }
    Ok(d)
}

pub fn similarity_node(g: &mut Graph, s_a: NodeId, s_b: NodeId, w0: NodeId) -> Result<NodeId> {
    let d = check_shapes(g, s_a, s_b, w0)?;
    let w_a = g.slice_cols(w0, 0, d);
    let w_b = g.slice_cols(w0, d, d);
    let w_ab = g.slice_cols(w0, 2 * d, d);
    let w_a_t = g.transpose(w_a);
    let term_a = g.matmul(s_a, w_a_t);
    let w_b_t = g.transpose(w_b);
    let term_b_col = g.matmul(s_b, w_b_t);
    let term_b = g.transpose(term_b_col);
    let scaled = g.mul_row(s_a, w_ab);
    let s_b_t = g.transpose(s_b);
    let cross = g.matmul(scaled, s_b_t);
    let with_a = g.add_col(cross, term_a);
    Ok(g.add_row(with_a, term_b))
}

/// Full fusion. With `valid`, columns `j ≥ valid.b` get `-∞` similarity
/// before both softmaxes and rows `i ≥ valid.a` get `-∞` before the `β`
/// softmax, so padding attracts no attention.
pub fn fuse_nodes(g: &mut Graph, s_a: NodeId, s_b: NodeId, w0: NodeId, valid: Option<ValidLengths>) -> Result<FusionNodes> {
    let h = similarity_node(g, s_a, s_b, w0)?;
    let (l, k) = g.shape(h);
    let scores = match valid {
        Some(v) if v.b < k => {
            if v.b == 0 {
                return Err(Error::Shape("no valid S_b positions".into()));
            }
            let mut mask = Matrix::zeros(l, k);
            for i in 0..l {
                mask.row_mut(i)[v.b..].fill(f64::NEG_INFINITY);
            }
            let mask = g.constant(mask);
            g.add(h, mask)
        }
        _ => h,
    };
    let a = g.softmax_rows(scores);
    let s_b_tilde = g.matmul(a, s_b);
    let mut row_max = g.max_cols(scores);
    if let Some(v) = valid.filter(|v| v.a < l) {
        if v.a == 0 {
            return Err(Error::Shape("no valid S_a positions".into()));
        }
        let mut mask = Matrix::zeros(l, 1);
        for i in v.a..l {
            mask.set(i, 0, f64::NEG_INFINITY);
        }
        let mask = g.constant(mask);
        row_max = g.add(row_max, mask);
    }
    let row_max_t = g.transpose(row_max);
    let b = g.softmax_rows(row_max_t);
    let s_a_tilde = g.matmul(b, s_a);
    let prod_b = g.mul(s_a, s_b_tilde);
    let prod_a = g.mul_row(s_a, s_a_tilde);
    let u = g.concat_cols(&[s_a, s_b_tilde, prod_b, prod_a]);
    Ok(FusionNodes {
        u,
        h,
        a,
        b,
        s_b_tilde,
        s_a_tilde,
    })
}

/// Values of one fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionOutput {
    pub u: Matrix,
    pub h: Matrix,
    pub a: Matrix,
    pub b: Vec<f64>,
}

/// `H[i,j] = w0 · [a_i ; b_j ; a_i ∘ b_j]`.
pub fn similarity(s_a: &Matrix, s_b: &Matrix, w0: &[f64]) -> Result<Matrix> {
    let mut g = Graph::detached();
    let (a, b) = (g.constant(s_a.clone()), g.constant(s_b.clone()));
    let w = g.constant(Matrix::row_vector(w0.to_vec()));
    let h = similarity_node(&mut g, a, b, w)?;
    Ok(g.value(h).clone())
}

/// `S̃_b[i] = Σ_j softmax(H[i,:])_j b_j`.
pub fn attend_a_to_b(h: &Matrix, s_b: &Matrix) -> Result<Matrix> {
    if h.cols() != s_b.rows() {
        return Err(Error::Shape(format!(
            "H has {} columns, S_b has {} rows",
            h.cols(),
            s_b.rows()
        )));
    }
    let mut g = Graph::detached();
    let hn = g.constant(h.clone());
    let b = g.constant(s_b.clone());
    let a = g.softmax_rows(hn);
    let out = g.matmul(a, b);
    Ok(g.value(out).clone())
}

/// Returns `(β, s̃_a)` and `s̃_a` tiled over the `L` rows.
pub fn attend_b_to_a(h: &Matrix, s_a: &Matrix) -> Result<(Vec<f64>, Vec<f64>, Matrix)> {
    if h.rows() != s_a.rows() {
        return Err(Error::Shape(format!("H has {} rows, S_a has {} rows", h.rows(), s_a.rows())));
    }
    let mut g = Graph::detached();
    let hn = g.constant(h.clone());
    let a = g.constant(s_a.clone());
    let m = g.max_cols(hn);
    let mt = g.transpose(m);
    let b = g.softmax_rows(mt);
    let s = g.matmul(b, a);
    let vec = g.value(s).data().to_vec();
    let tiled = Matrix::from_rows(&vec![vec.clone(); s_a.rows()]);
    Ok((g.value(b).data().to_vec(), vec, tiled))
}

pub fn fuse(s_a: &Matrix, s_b: &Matrix, w0: &[f64]) -> Result<FusionOutput> {
    fuse_masked(s_a, s_b, w0, None)
}

pub fn fuse_masked(s_a: &Matrix, s_b: &Matrix, w0: &[f64], valid: Option<ValidLengths>) -> Result<FusionOutput> {
    let mut g = Graph::detached();
    let (a, b) = (g.constant(s_a.clone()), g.constant(s_b.clone()));
    let w = g.constant(Matrix::row_vector(w0.to_vec()));
    let f = fuse_nodes(&mut g, a, b, w, valid)?;
    Ok(FusionOutput {
        u: g.value(f.u).clone(),
        h: g.value(f.h).clone(),
        a: g.value(f.a).clone(),
        b: g.value(f.b).data().to_vec(),
    })
}
