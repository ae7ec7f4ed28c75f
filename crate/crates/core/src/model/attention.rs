//! Scaled dot-product and multi-head attention, as plain matrix functions
//! and as graph builders.

use std::sync::Arc;

use crate::error::{contract, Error, Result};
use crate::numerics::{matmul, matmul_nt, softmax_rows, DiffGraph, Mask, Matrix, NodeId};

/// `softmax(Q Kᵀ / √d_k) V`
pub fn scaled_dot_attention(q: &Matrix, k: &Matrix, v: &Matrix, mask: Option<&Mask>) -> Result<Matrix> {
    Ok(matmul(&attention_weights(q, k, mask)?, v)?)
}

pub fn attention_weights(q: &Matrix, k: &Matrix, mask: Option<&Mask>) -> Result<Matrix> {
    if q.cols() != k.cols() {
        return Err(contract(format!("query width {} vs key width {}", q.cols(), k.cols())));
    }
    let scores = matmul_nt(q, k)?.scale(1.0 / (q.cols() as f64).sqrt());
    softmax_rows(&scores, mask)
}

/// Per-head projections, each `d_model × d_k`, and the output map
/// `(h · d_v) × d_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix,
}

impl AttentionParams {
    pub fn heads(&self) -> usize {
        self.w_q.len()
    }

    /// Splits column-stacked `d × d` projections into `heads` blocks.
    pub fn from_stacked(wq: &Matrix, wk: &Matrix, wv: &Matrix, wo: &Matrix, heads: usize) -> Result<Self> {
        let d = wq.cols();
        if heads == 0 || d % heads != 0 {
            return Err(Error::Config(format!("width {d} is not divisible by {heads} heads")));
        }
        let dk = d / heads;
        let split = |w: &Matrix| (0..heads).map(|h| w.slice_cols(h * dk, dk)).collect::<Result<Vec<_>>>();
        Ok(Self {
            w_q: split(wq)?,
            w_k: split(wk)?,
            w_v: split(wv)?,
            w_o: wo.clone(),
        })
    }
}

/// `Concat(head₁ … head_h) W_O` with `headᵢ = Attention(x_q W_Qᵢ, x_kv W_Kᵢ, x_kv W_Vᵢ)`.
pub fn multi_head(x_q: &Matrix, x_kv: &Matrix, p: &AttentionParams, mask: Option<&Mask>) -> Result<Matrix> {
    let h = p.heads();
    if h == 0 || p.w_k.len() != h || p.w_v.len() != h {
        return Err(Error::Config("attention needs the same positive number of Q/K/V heads".into()));
    }
    let heads = (0..h)
        .map(|i| {
            let q = matmul(x_q, &p.w_q[i])?;
            let k = matmul(x_kv, &p.w_k[i])?;
            let v = matmul(x_kv, &p.w_v[i])?;
            scaled_dot_attention(&q, &k, &v, mask)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Matrix> = heads.iter().collect();
    matmul(&Matrix::concat_cols(&refs)?, &p.w_o)
}

/// Graph nodes of one attention block: stacked `d × d` projections.
#[derive(Debug, Clone, Copy)]
pub struct AttnNodes {
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
    pub wo: NodeId,
}

pub fn graph_attention(g: &mut DiffGraph, q: NodeId, k: NodeId, v: NodeId, mask: Option<Arc<Mask>>) -> Result<NodeId> {
    let dk = g.value(q).cols();
    let s = g.matmul_nt(q, k)?;
    let s = g.scale(s, 1.0 / (dk as f64).sqrt())?;
    let a = g.softmax(s, mask)?;
    g.matmul(a, v)
}

pub fn graph_multi_head(
    g: &mut DiffGraph,
    x_q: NodeId,
    x_kv: NodeId,
    p: AttnNodes,
    heads: usize,
    mask: Option<Arc<Mask>>,
) -> Result<NodeId> {
    let q = g.matmul(x_q, p.wq)?;
    let k = g.matmul(x_kv, p.wk)?;
    let v = g.matmul(x_kv, p.wv)?;
    let d = g.value(q).cols();
    let dk = d / heads;
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dk, dk)?;
        let kh = g.slice_cols(k, h * dk, dk)?;
        let vh = g.slice_cols(v, h * dk, dk)?;
        outs.push(graph_attention(g, qh, kh, vh, mask.clone())?);
    }
    let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
    g.matmul(cat, p.wo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn single_key_returns_its_value() {
        let q = Matrix::row_vector(&[1.0, 2.0]);
        let v = Matrix::row_vector(&[3.0, -4.0, 5.0]);
        assert_eq!(scaled_dot_attention(&q, &q, &v, None).unwrap(), v);
    }

    #[test]
    fn uniform_scores_average_values() {
        let q = Matrix::zeros(2, 3);
        let k = Matrix::filled(4, 3, 0.7);
        let mut rng = RngState::new(1);
        let v = rng.normal_matrix(4, 2);
        let out = scaled_dot_attention(&q, &k, &v, None).unwrap();
        for c in 0..2 {
            let mean = (0..4).map(|r| v.get(r, c)).sum::<f64>() / 4.0;
            assert!((out.get(0, c) - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn single_identity_head_reduces_to_attention() {
        let mut rng = RngState::new(2);
        let x = rng.normal_matrix(5, 4);
        let y = rng.normal_matrix(3, 4);
        let i = Matrix::identity(4);
        let p = AttentionParams::from_stacked(&i, &i, &i, &i, 1).unwrap();
        let got = multi_head(&x, &y, &p, None).unwrap();
        let want = scaled_dot_attention(&x, &y, &y, None).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12);
        let zero = AttentionParams { w_o: Matrix::zeros(4, 4), ..p };
        assert_eq!(multi_head(&x, &y, &zero, None).unwrap(), Matrix::zeros(5, 4));
    }

    #[test]
    fn graph_matches_plain_functions() {
        let mut rng = RngState::new(3);
        let (d, h) = (8, 4);
        let x = rng.normal_matrix(6, d);
        let ws: Vec<Matrix> = (0..4).map(|_| rng.normal_matrix(d, d)).collect();
        let mask = Arc::new(Mask::causal(6));
        let p = AttentionParams::from_stacked(&ws[0], &ws[1], &ws[2], &ws[3], h).unwrap();
        let want = multi_head(&x, &x, &p, Some(&mask)).unwrap();

        let mut g = DiffGraph::new();
        let xn = g.constant(x);
        let n = AttnNodes {
            wq: g.constant(ws[0].clone()),
            wk: g.constant(ws[1].clone()),
            wv: g.constant(ws[2].clone()),
            wo: g.constant(ws[3].clone()),
        };
        let out = graph_multi_head(&mut g, xn, xn, n, h, Some(mask)).unwrap();
        assert!(g.value(out).max_abs_diff(&want) < 1e-12);
    }
}
