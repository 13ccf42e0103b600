//! The encoder forward pass.
//!
//! `encode` runs five stages: type-specific transform, K-hop message passing,
//! hop attention, shortcut activation and attentive pooling over answer nodes.
//!
//! Message passing never enumerates paths. For each relation `r` it keeps a
//! running message matrix `M_r` holding the attention-weighted, transformed
//! features of every walk whose last step carries `r`, so one hop costs one
//! sparse pass per relation:
//!
//! ```text
//! hop 1:  M_r = e^{delta_r} A_r (F X) W_r^T
//! hop k:  M_r = e^{delta_r} A_r (sum_{r'} e^{tau(r', r)} M_{r'}) W_r^T
//! Z^k     = G (sum_r M_r) What^k,   What^k = (W_0^K ... W_0^{k+1})^T
//! ```
//!
//! with `F = diag(e^{f(type(v), s)})` and `G = diag(e^{g(type(v), s)})`. The
//! normalizers `d^k` come from the same recursion run on an all-ones column
//! with every `W` replaced by the identity.

mod params;

pub use params::{Activation, EncoderConfig, ModelDims, ModelParams};

use serde::Serialize;

use crate::attention::ScoreTable;
use crate::error::{dim_err, Error, Result};
use crate::numkit::{axpy, masked_softmax, DenseMatrix};
use crate::relgraph::{MultiRelGraph, NodeType};

/// Per-hop aggregates after normalization.
#[derive(Clone, Debug, Serialize)]
pub struct HopMessages {
    /// `z[k - 1]` is `Z^k`, `n x d`
    pub z: Vec<DenseMatrix>,
    /// `d_norm[k - 1][i]` is the total attention of `k`-hop walks ending at `i`
    pub d_norm: Vec<Vec<f64>>,
}

impl HopMessages {
    pub fn is_masked(&self, k: usize, i: usize) -> bool {
        self.d_norm[k - 1][i] == 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EncoderOutput {
    /// transformed features, `n x d`
    pub x: DenseMatrix,
    /// `Z^1..Z^K`
    pub z_hops: Vec<DenseMatrix>,
    pub d_norm: Vec<Vec<f64>>,
    /// hop-attended aggregate, `n x d`
    pub z: DenseMatrix,
    /// `n x K`, rows sum to 1 over unmasked hops (all zero if every hop is masked)
    pub hop_weights: DenseMatrix,
    /// `n x d_out`
    pub hprime: DenseMatrix,
    pub g_vec: Vec<f64>,
    /// length `n`, nonzero only on answer nodes
    pub pool_weights: Vec<f64>,
}

/// `x_i = U_{type(i)} h_i + b_{type(i)}`.
pub fn type_transform(
    h: &DenseMatrix,
    phi: &[NodeType],
    params: &ModelParams,
    config: &EncoderConfig,
) -> Result<DenseMatrix> {
    if h.rows() != phi.len() {
        return dim_err(format!("{} feature rows for {} nodes", h.rows(), phi.len()));
    }
    if h.cols() != params.header.d_in {
        return dim_err(format!("features of width {}, expected {}", h.cols(), params.header.d_in));
    }
    let d = params.header.d;
    let mut x = DenseMatrix::zeros(h.rows(), d);
    for (i, t) in phi.iter().enumerate() {
        let slot = if config.use_type_transform { t.index() } else { NodeType::Other.index() };
        let (u, b) = (&params.u[slot], &params.b[slot]);
        let row = x.row_mut(i);
        for (o, out) in row.iter_mut().enumerate() {
            *out = crate::numkit::dot(u.row(o), h.row(i)) + b[o];
        }
    }
    Ok(x)
}

/// `A_r` applied to the rows of `input`, with per-relation mixing of the
/// previous messages folded into the edge loop.
fn gather(
    graph: &MultiRelGraph,
    r: usize,
    cols: usize,
    mut source_row: impl FnMut(usize, &mut [f64]),
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(graph.n(), cols);
    let mut buf = vec![0.0; cols];
    for &(j, i) in graph.edges(r) {
        buf.iter_mut().for_each(|v| *v = 0.0);
        source_row(j, &mut buf);
        axpy(out.row_mut(i), 1.0, &buf);
    }
    out
}

/// Runs the relation-indexed recursion and returns `sum_r M_r` for every hop.
/// `weights` is `None` for the normalizer pass, where every `W` is the identity.
fn propagate(
    graph: &MultiRelGraph,
    init: &DenseMatrix,
    hops: usize,
    rel_scale: &[f64],
    trans: &DenseMatrix,
    weights: Option<&[Vec<DenseMatrix>]>,
) -> Result<Vec<DenseMatrix>> {
    let (n, c, m) = (graph.n(), init.cols(), graph.m());
    let mut msgs: Vec<Option<DenseMatrix>> = vec![None; m];
    let mut totals = Vec::with_capacity(hops);
    for hop in 1..=hops {
        let mut next: Vec<Option<DenseMatrix>> = Vec::with_capacity(m);
        for r in 1..=m {
            if graph.edges(r).is_empty() {
                next.push(None);
                continue;
            }
            let mut agg = if hop == 1 {
                gather(graph, r, c, |j, buf| buf.copy_from_slice(init.row(j)))
            } else {
                gather(graph, r, c, |j, buf| {
                    for (rp, prev) in msgs.iter().enumerate() {
                        if let Some(prev) = prev {
                            axpy(buf, trans.get(rp, r - 1), prev.row(j));
                        }
                    }
                })
            };
            if let Some(w) = weights {
                agg = agg.matmul_t(&w[hop - 1][r])?;
            }
            agg.scale(rel_scale[r - 1]);
            next.push(Some(agg));
        }
        msgs = next;
        let mut total = DenseMatrix::zeros(n, c);
        for m_r in msgs.iter().flatten() {
            axpy(total.data_mut(), 1.0, m_r.data());
        }
        totals.push(total);
    }
    Ok(totals)
}

/// K-hop message passing by dynamic programming, linear in `k` and in the
/// number of edges.
pub fn multihop_pass(
    x: &DenseMatrix,
    graph: &MultiRelGraph,
    s: &[f64],
    params: &ModelParams,
    k: usize,
) -> Result<HopMessages> {
    let table = params.att.table(s)?;
    multihop_pass_with_table(x, graph, &table, params, k)
}

pub(crate) fn multihop_pass_with_table(
    x: &DenseMatrix,
    graph: &MultiRelGraph,
    table: &ScoreTable,
    params: &ModelParams,
    k: usize,
) -> Result<HopMessages> {
    let (n, d) = (graph.n(), params.header.d);
    if x.shape() != (n, d) {
        return dim_err(format!("X is {:?}, expected ({n}, {d})", x.shape()));
    }
    if k == 0 || k > params.w.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} but parameters cover {} hops",
            params.w.len()
        )));
    }
    if graph.m() != table.m() {
        return dim_err(format!("graph has {} relations, parameters {}", graph.m(), table.m()));
    }

    let src: Vec<f64> = graph.phi().iter().map(|t| table.f[t.index()].exp()).collect();
    let dst: Vec<f64> = graph.phi().iter().map(|t| table.g[t.index()].exp()).collect();
    let rel_scale: Vec<f64> = table.delta.iter().map(|v| v.exp()).collect();
    let trans = table.tau.map(f64::exp);

    // What^K = I, What^t = W_0^{t+1}^T What^{t+1}
    let mut what = vec![DenseMatrix::identity(d); k];
    for t in (1..k).rev() {
        what[t - 1] = params.w[t][0].transpose().matmul(&what[t])?;
    }

    let mut fx = x.clone();
    for (i, w) in src.iter().enumerate() {
        fx.row_mut(i).iter_mut().for_each(|v| *v *= w);
    }
    let sums = propagate(graph, &fx, k, &rel_scale, &trans, Some(&params.w))?;
    let norms = propagate(graph, &DenseMatrix::column(&src), k, &rel_scale, &trans, None)?;

    let mut z = Vec::with_capacity(k);
    let mut d_norm = Vec::with_capacity(k);
    for (hop, (sum, norm)) in sums.into_iter().zip(norms).enumerate() {
        let mut zk = sum.matmul(&what[hop])?;
        let dk: Vec<f64> = norm.data().iter().zip(&dst).map(|(v, g)| v * g).collect();
        for i in 0..n {
            let scale = if dk[i] == 0.0 { 0.0 } else { dst[i] / dk[i] };
            zk.row_mut(i).iter_mut().for_each(|v| *v *= scale);
        }
        if !zk.is_finite() || dk.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multi-hop messages"));
        }
        z.push(zk);
        d_norm.push(dk);
    }
    Ok(HopMessages { z, d_norm })
}

/// Per-node softmax over hops of `s^T B_hop z_i^k`, skipping masked hops.
pub fn hop_attention(
    s: &[f64],
    hops: &HopMessages,
    params: &ModelParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let k = hops.z.len();
    if k == 0 {
        return dim_err("no hop aggregates");
    }
    let (n, d) = hops.z[0].shape();
    if params.b_hop.shape() != (s.len(), d) {
        return dim_err(format!("B_hop is {:?} for s of {} and d = {d}", params.b_hop.shape(), s.len()));
    }
    let query = params.b_hop.t_matvec(s)?;
    let mut z = DenseMatrix::zeros(n, d);
    let mut weights = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let keep: Vec<bool> = (0..k).map(|h| hops.d_norm[h][i] != 0.0).collect();
        if !keep.iter().any(|&b| b) {
            continue;
        }
        let scores: Vec<f64> = hops.z.iter().map(|zk| crate::numkit::dot(&query, zk.row(i))).collect();
        let w = masked_softmax(&scores, &keep)?;
        for (h, wh) in w.iter().enumerate() {
            weights.set(i, h, *wh);
            if *wh != 0.0 {
                axpy(z.row_mut(i), *wh, hops.z[h].row(i));
            }
        }
    }
    Ok((z, weights))
}

/// `h'_i = sigma(V h_i + V' z_i)`.
pub fn activate(
    h: &DenseMatrix,
    z: &DenseMatrix,
    params: &ModelParams,
    sigma: Activation,
) -> Result<DenseMatrix> {
    let pre = h.matmul_t(&params.v)?.add(&z.matmul_t(&params.v_prime)?)?;
    Ok(pre.map(|v| sigma.apply(v)))
}

/// Attentive pooling over answer nodes with scores `s^T P_pool h'_i`.
pub fn pool_answer(
    hprime: &DenseMatrix,
    phi: &[NodeType],
    s: &[f64],
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if hprime.rows() != phi.len() {
        return dim_err(format!("{} embeddings for {} nodes", hprime.rows(), phi.len()));
    }
    let keep: Vec<bool> = phi.iter().map(|t| *t == NodeType::Answer).collect();
    if !keep.iter().any(|&b| b) {
        return Err(Error::NoAnswerNodes);
    }
    if params.p_pool.shape() != (s.len(), hprime.cols()) {
        return dim_err(format!("P_pool is {:?}", params.p_pool.shape()));
    }
    let query = params.p_pool.t_matvec(s)?;
    let scores: Vec<f64> = (0..hprime.rows())
        .map(|i| if keep[i] { crate::numkit::dot(&query, hprime.row(i)) } else { 0.0 })
        .collect();
    let weights = masked_softmax(&scores, &keep)?;
    let mut g = vec![0.0; hprime.cols()];
    for (i, w) in weights.iter().enumerate() {
        if keep[i] {
            axpy(&mut g, *w, hprime.row(i));
        }
    }
    Ok((g, weights))
}

/// Full forward pass for one (graph, statement) pair.
pub fn encode(
    graph: &MultiRelGraph,
    h: &DenseMatrix,
    s: &[f64],
    params: &ModelParams,
    config: &EncoderConfig,
) -> Result<EncoderOutput> {
    if s.len() != params.header.d_s {
        return dim_err(format!("statement of {} for d_s = {}", s.len(), params.header.d_s));
    }
    let params = config.apply(params);
    let x = type_transform(h, graph.phi(), &params, config)?;
    let hops = multihop_pass(&x, graph, s, &params, config.k)?;
    let (z, hop_weights) = hop_attention(s, &hops, &params)?;
    let hprime = activate(h, &z, &params, config.activation)?;
    let (g_vec, pool_weights) = pool_answer(&hprime, graph.phi(), s, &params)?;
    Ok(EncoderOutput {
        x,
        z_hops: hops.z,
        d_norm: hops.d_norm,
        z,
        hop_weights,
        hprime,
        g_vec,
        pool_weights,
    })
}

#[cfg(test)]
mod tests;
