//! Reference encoders: RGCN, RN and K-hop RN, and the parameter setting under
//! which the MHGRN encoder computes K-hop RN exactly.

use crate::attention::AttentionParams;
use crate::encoder::{Activation, EncoderConfig, ModelDims, ModelParams};
use crate::error::{dim_err, Error, Result};
use crate::numkit::{axpy, glorot_init, DenseMatrix, Mlp, Rng};
use crate::pathreason::for_each_walk;
use crate::relgraph::{MultiRelGraph, NodeType};

/// One RGCN layer: `h'_i = sigma(mean over in-edges (j, r, i) of W_r h_j)`.
/// `w_per_rel[r - 1]` is `d_out x d_in`. Nodes without in-edges get `sigma(0)`.
pub fn rgcn_layer(
    h: &DenseMatrix,
    graph: &MultiRelGraph,
    w_per_rel: &[DenseMatrix],
    sigma: Activation,
) -> Result<DenseMatrix> {
    if w_per_rel.len() != graph.m() {
        return dim_err(format!("{} relation matrices for m = {}", w_per_rel.len(), graph.m()));
    }
    if h.rows() != graph.n() {
        return dim_err(format!("{} feature rows for {} nodes", h.rows(), graph.n()));
    }
    let d_out = w_per_rel.first().map_or(h.cols(), DenseMatrix::rows);
    let mut out = DenseMatrix::zeros(graph.n(), d_out);
    let mut degree = vec![0usize; graph.n()];
    for (ri, w) in w_per_rel.iter().enumerate() {
        let edges = graph.edges(ri + 1);
        if edges.is_empty() {
            continue;
        }
        let projected = h.matmul_t(w)?;
        for &(j, i) in edges {
            axpy(out.row_mut(i), 1.0, projected.row(j));
            degree[i] += 1;
        }
    }
    for (i, deg) in degree.iter().enumerate() {
        let scale = if *deg == 0 { 0.0 } else { 1.0 / *deg as f64 };
        out.row_mut(i).iter_mut().for_each(|v| *v = sigma.apply(*v * scale));
    }
    Ok(out)
}

/// Stacked RGCN weights, `layers[l][r - 1]`.
#[derive(Clone, Debug)]
pub struct RgcnParams {
    pub layers: Vec<Vec<DenseMatrix>>,
}

impl RgcnParams {
    pub fn random(layers: usize, m: usize, d: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        Self { layers: (0..layers).map(|_| (0..m).map(|_| glorot_init(d, d, &mut rng)).collect()).collect() }
    }
}

pub fn rgcn_encode(
    h: &DenseMatrix,
    graph: &MultiRelGraph,
    params: &RgcnParams,
    sigma: Activation,
) -> Result<DenseMatrix> {
    let mut x = h.clone();
    for layer in &params.layers {
        x = rgcn_layer(&x, graph, layer, sigma)?;
    }
    Ok(x)
}

/// Question-to-answer triples pooled by mean: `mean MLP(h_j ++ e_r ++ h_i)`.
pub fn rn_encode(
    graph: &MultiRelGraph,
    h: &DenseMatrix,
    rel_emb: &DenseMatrix,
    mlp: &Mlp,
) -> Result<Vec<f64>> {
    if rel_emb.rows() != graph.m() {
        return dim_err(format!("{} relation embeddings for m = {}", rel_emb.rows(), graph.m()));
    }
    let mut total = vec![0.0; mlp.output_dim()];
    let mut count = 0usize;
    for (j, r, i) in graph.triples() {
        if graph.node_type(j) != NodeType::Question || graph.node_type(i) != NodeType::Answer {
            continue;
        }
        let input = [h.row(j), rel_emb.row(r - 1), h.row(i)].concat();
        axpy(&mut total, 1.0, &mlp.forward(&input)?);
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoTriples);
    }
    total.iter_mut().for_each(|v| *v /= count as f64);
    Ok(total)
}

/// K-hop relation network weights.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RnParams {
    /// `d3 x (d1 + d2 + d1)`, blocks applied to source, relation product, target
    pub w_tilde: DenseMatrix,
    /// `m x d2`, row `r - 1` embeds relation `r`
    pub e_tilde: DenseMatrix,
    /// `n x d1`
    pub h_tilde: DenseMatrix,
}

impl RnParams {
    pub fn random(n: usize, m: usize, d1: usize, d2: usize, d3: usize, rng: &mut Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .expect("sized")
        };
        Self { w_tilde: uniform(d3, 2 * d1 + d2), e_tilde: uniform(m, d2), h_tilde: uniform(n, d1) }
    }

    pub fn d1(&self) -> usize {
        self.h_tilde.cols()
    }

    pub fn d2(&self) -> usize {
        self.e_tilde.cols()
    }

    pub fn d3(&self) -> usize {
        self.w_tilde.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_tilde.cols() != 2 * self.d1() + self.d2() {
            return dim_err(format!(
                "W~ has {} columns, expected 2*{} + {}",
                self.w_tilde.cols(),
                self.d1(),
                self.d2()
            ));
        }
        Ok(())
    }
}

/// K-hop RN by direct enumeration: every walk of length `k <= K` from a question
/// node `j` to an answer node `i` contributes
/// `W~ (h_j ++ e_{r_1} * ... * e_{r_k} ++ h_i) / (K |A| c_{i,k})`, where
/// `c_{i,k}` counts the `k`-step walks from question nodes into `i`.
pub fn khop_rn(graph: &MultiRelGraph, rn: &RnParams, k_max: usize) -> Result<Vec<f64>> {
    rn.validate()?;
    if rn.h_tilde.rows() != graph.n() || rn.e_tilde.rows() != graph.m() {
        return dim_err("RN parameters do not match the graph");
    }
    let questions = graph.node_set(NodeType::Question);
    let answers = graph.node_set(NodeType::Answer);
    if questions.is_empty() || answers.is_empty() {
        return Err(Error::NoPath("graph needs question and answer nodes".into()));
    }
    let (d1, d2) = (rn.d1(), rn.d2());
    let mut out = vec![0.0; rn.d3()];
    let mut any = false;
    for k in 1..=k_max {
        // (target, input vector) per walk
        let mut walks: Vec<(usize, Vec<f64>)> = Vec::new();
        for_each_walk(graph, k, Some(&questions), |nodes, rels| {
            let (j, i) = (nodes[0], nodes[k]);
            if !answers.contains(&i) {
                return;
            }
            let mut input = Vec::with_capacity(2 * d1 + d2);
            input.extend_from_slice(rn.h_tilde.row(j));
            let mut prod = vec![1.0; d2];
            for &r in rels {
                prod.iter_mut().zip(rn.e_tilde.row(r - 1)).for_each(|(p, e)| *p *= e);
            }
            input.extend_from_slice(&prod);
            input.extend_from_slice(rn.h_tilde.row(i));
            walks.push((i, input));
        });
        let mut counts = vec![0usize; graph.n()];
        for (i, _) in &walks {
            counts[*i] += 1;
        }
        for (i, input) in &walks {
            let weight = 1.0 / (k_max * answers.len() * counts[*i]) as f64;
            axpy(&mut out, weight, &rn.w_tilde.matvec(input)?);
            any = true;
        }
    }
    if !any {
        return Err(Error::NoPath("no question-to-answer walk".into()));
    }
    Ok(out)
}

/// Encoder parameters, config and input features under which `encode` returns
/// `khop_rn` as its pooled vector.
#[derive(Clone, Debug)]
pub struct EquivalentModel {
    pub params: ModelParams,
    pub config: EncoderConfig,
    pub features: DenseMatrix,
}

/// Large enough that `exp(-SUPPRESS)` is exactly zero.
const SUPPRESS: f64 = 1e30;

/// Node score MLP that returns 0 for `keep` and `-1e30` for every other type.
fn gate_mlp(keep: NodeType, d_s: usize) -> Mlp {
    let mut mlp = Mlp::zeros(NodeType::COUNT + d_s, 1, 1);
    // tanh(40) rounds to exactly 1.0
    mlp.w1.set(0, keep.index(), 40.0);
    mlp.w2.set(0, 0, SUPPRESS);
    mlp.b2[0] = -SUPPRESS;
    mlp
}

/// The K-hop RN embedding: `H = H~`, `U = [I; 0]`, `b = [0; 1]`,
/// `W_r^t = diag(1 ++ e~_r)` (identity padding), `V = W~_3`, `V' = [W~_1, W~_2]`,
/// relation attention off, node attention passing only question -> answer,
/// identity activation, uniform hop weights and mean pooling over answers.
///
/// The pooled output equals `khop_rn` whenever every answer node is reached from
/// a question node by walks of every length `1..=K`; otherwise the encoder masks
/// the missing hops and renormalizes where K-hop RN does not.
pub fn construct_equiv_params(rn: &RnParams, k: usize, d_s: usize) -> Result<EquivalentModel> {
    rn.validate()?;
    let (d1, d2, d3, m) = (rn.d1(), rn.d2(), rn.d3(), rn.e_tilde.rows());
    let d = d1 + d2;
    let dims = ModelDims {
        d_in: d1,
        d,
        d_out: d3,
        d_s,
        k,
        m,
        h_att: 1,
        rho_hidden: 1,
        activation: Activation::Identity,
        seed: 0,
    };
    let mut stack = DenseMatrix::zeros(d, d1);
    for c in 0..d1 {
        stack.set(c, c, 1.0);
    }
    let bias: Vec<f64> = (0..d).map(|c| if c < d1 { 0.0 } else { 1.0 }).collect();
    let rel_w = |r: usize| {
        let diag: Vec<f64> = (0..d).map(|c| if c < d1 { 1.0 } else { rn.e_tilde.get(r - 1, c - d1) }).collect();
        DenseMatrix::diag(&diag)
    };
    let hop: Vec<DenseMatrix> =
        std::iter::once(DenseMatrix::identity(d)).chain((1..=m).map(rel_w)).collect();
    let mut att = AttentionParams::zeros(m, d_s, 1);
    att.f_mlp = gate_mlp(NodeType::Question, d_s);
    att.g_mlp = gate_mlp(NodeType::Answer, d_s);

    let params = ModelParams {
        u: vec![stack; NodeType::COUNT],
        b: vec![bias; NodeType::COUNT],
        w: vec![hop; k],
        v: rn.w_tilde.col_slice(d1 + d2, 2 * d1 + d2),
        v_prime: rn.w_tilde.col_slice(0, d1 + d2),
        att,
        b_hop: DenseMatrix::zeros(d_s, d),
        p_pool: DenseMatrix::zeros(d_s, d3),
        rho: Mlp::zeros(d_s + d3, 1, 1),
        header: dims,
    };
    params.validate()?;
    let config = EncoderConfig {
        k,
        use_type_transform: true,
        use_rel_attention: false,
        use_node_attention: true,
        activation: Activation::Identity,
    };
    Ok(EquivalentModel { params, config, features: rn.h_tilde.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::encode;
    use crate::pathreason::enumerate_paths;
    use crate::synth;
    use NodeType::*;

    #[test]
    fn rgcn_unit_weights_average_neighbors() {
        let g = MultiRelGraph::new(vec![Other; 3], None, 1, [(0, 1, 2), (1, 1, 2)]).unwrap();
        let h = DenseMatrix::from_rows(&[[1.0, 0.0], [3.0, 4.0], [9.0, 9.0]]).unwrap();
        let out = rgcn_layer(&h, &g, &[DenseMatrix::identity(2)], Activation::Identity).unwrap();
        assert_eq!(out.row(2), &[2.0, 2.0]);
        let out = rgcn_layer(&h, &g, &[DenseMatrix::identity(2)], Activation::Tanh).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn rgcn_matches_per_node_oracle() {
        let mut rng = Rng::new(13);
        let g = synth::bernoulli(6, 2, 0.3, &mut rng);
        let h = glorot_init(6, 3, &mut rng);
        let ws = vec![glorot_init(3, 3, &mut rng), glorot_init(3, 3, &mut rng)];
        let out = rgcn_layer(&h, &g, &ws, Activation::Tanh).unwrap();
        for i in 0..6 {
            let mut acc = [0.0; 3];
            let mut deg = 0.0;
            for r in 1..=2 {
                for j in 0..6 {
                    if g.has_edge(j, r, i) {
                        deg += 1.0;
                        for o in 0..3 {
                            for c in 0..3 {
                                acc[o] += ws[r - 1].get(o, c) * h.get(j, c);
                            }
                        }
                    }
                }
            }
            for o in 0..3 {
                let want = if deg > 0.0 { (acc[o] / deg).tanh() } else { 0.0 };
                assert!((out.get(i, o) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rgcn_mean_bounded_by_inputs() {
        let mut rng = Rng::new(2);
        let g = synth::bernoulli(8, 2, 0.4, &mut rng);
        let h = glorot_init(8, 3, &mut rng);
        // permutation matrices are orthonormal
        let perm = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let out = rgcn_layer(&h, &g, &[perm, DenseMatrix::identity(3)], Activation::Identity).unwrap();
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let max_in = (0..8).map(|i| norm(h.row(i))).fold(0.0, f64::max);
        for i in 0..8 {
            assert!(norm(out.row(i)) <= max_in + 1e-12);
        }
    }

    #[test]
    fn rn_examples() {
        let g = MultiRelGraph::new(vec![Question, Answer, Other], None, 2, [(0, 1, 1), (0, 2, 1), (2, 1, 1)])
            .unwrap();
        let mut rng = Rng::new(13);
        let h = glorot_init(3, 2, &mut rng);
        let e = glorot_init(2, 2, &mut rng);
        let mut mlp = Mlp::zeros(6, 3, 2);
        mlp.b2 = vec![0.5, -1.5];
        assert_eq!(rn_encode(&g, &h, &e, &mlp).unwrap(), vec![0.5, -1.5]);

        let mlp = Mlp::random(6, 3, 2, &mut rng);
        let single = MultiRelGraph::new(vec![Question, Answer], None, 2, [(0, 2, 1)]).unwrap();
        let got = rn_encode(&single, &h.col_slice(0, 2), &e, &mlp).unwrap();
        let input = [h.row(0), e.row(1), h.row(1)].concat();
        assert_eq!(got, mlp.forward(&input).unwrap());

        let avg = rn_encode(&g, &h, &e, &mlp).unwrap();
        let a = mlp.forward(&[h.row(0), e.row(0), h.row(1)].concat()).unwrap();
        let b = mlp.forward(&[h.row(0), e.row(1), h.row(1)].concat()).unwrap();
        for c in 0..2 {
            assert!((avg[c] - (a[c] + b[c]) / 2.0).abs() < 1e-15);
        }
        let none = MultiRelGraph::new(vec![Question, Answer], None, 2, [(1, 1, 0)]).unwrap();
        assert!(matches!(rn_encode(&none, &h.col_slice(0, 2), &e, &mlp), Err(Error::NoTriples)));
    }

    #[test]
    fn rn_matches_enumerate_and_average() {
        let mut rng = Rng::new(13);
        let g = synth::answer_reachable(7, 3, 0.3, &mut rng);
        let h = glorot_init(7, 2, &mut rng);
        let e = glorot_init(3, 2, &mut rng);
        let mlp = Mlp::random(6, 4, 3, &mut rng);
        let mut outs = Vec::new();
        for j in 0..7 {
            for i in 0..7 {
                for r in 1..=3 {
                    if g.has_edge(j, r, i) && g.node_type(j) == Question && g.node_type(i) == Answer {
                        let x: Vec<f64> = h.row(j).iter().chain(e.row(r - 1)).chain(h.row(i)).copied().collect();
                        outs.push(mlp.forward(&x).unwrap());
                    }
                }
            }
        }
        let got = rn_encode(&g, &h, &e, &mlp).unwrap();
        for c in 0..3 {
            let want = outs.iter().map(|o| o[c]).sum::<f64>() / outs.len() as f64;
            assert!((got[c] - want).abs() < 1e-14);
        }
    }

    /// Independent double loop over the enumerated walk list.
    fn khop_rn_oracle(g: &MultiRelGraph, rn: &RnParams, k_max: usize) -> Vec<f64> {
        let q = g.node_set(Question);
        let a = g.node_set(Answer);
        let paths = enumerate_paths(g, k_max, Some(&q), Some(&a));
        let mut out = vec![0.0; rn.d3()];
        for p in &paths {
            let c = paths.iter().filter(|o| o.k() == p.k() && o.target == p.target).count();
            let beta = 1.0 / (k_max * a.len() * c) as f64;
            let (d1, d2) = (rn.d1(), rn.d2());
            for o in 0..rn.d3() {
                let mut v = 0.0;
                for c in 0..d1 {
                    v += rn.w_tilde.get(o, c) * rn.h_tilde.get(p.source, c);
                    v += rn.w_tilde.get(o, d1 + d2 + c) * rn.h_tilde.get(p.target, c);
                }
                for c in 0..d2 {
                    let prod: f64 = p.rels.iter().map(|r| rn.e_tilde.get(r - 1, c)).product();
                    v += rn.w_tilde.get(o, d1 + c) * prod;
                }
                out[o] += beta * v;
            }
        }
        out
    }

    #[test]
    fn khop_rn_matches_oracle() {
        let mut rng = Rng::new(13);
        let g = synth::answer_reachable(6, 2, 0.1, &mut rng);
        let rn = RnParams::random(6, 2, 3, 2, 4, &mut rng);
        let got = khop_rn(&g, &rn, 2).unwrap();
        let want = khop_rn_oracle(&g, &rn, 2);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn khop_rn_single_path_and_unit_embeddings() {
        let g = MultiRelGraph::new(vec![Question, Answer], None, 1, [(0, 1, 1)]).unwrap();
        let mut rng = Rng::new(4);
        let rn = RnParams::random(2, 1, 2, 2, 3, &mut rng);
        let input = [rn.h_tilde.row(0), rn.e_tilde.row(0), rn.h_tilde.row(1)].concat();
        assert_eq!(khop_rn(&g, &rn, 1).unwrap(), rn.w_tilde.matvec(&input).unwrap());

        let g = synth::answer_reachable(5, 3, 0.2, &mut rng);
        let mut rn = RnParams::random(5, 3, 2, 2, 3, &mut rng);
        rn.e_tilde = DenseMatrix::filled(3, 2, 1.0);
        let mut flipped = g.triples().collect::<Vec<_>>();
        flipped.iter_mut().for_each(|t| t.1 = 1 + t.1 % 3);
        let relabeled = MultiRelGraph::new(g.phi().to_vec(), None, 3, flipped).unwrap();
        assert_eq!(khop_rn(&g, &rn, 3).unwrap(), khop_rn(&relabeled, &rn, 3).unwrap());
        let base = khop_rn_oracle(&g, &rn, 3);
        for (a, b) in khop_rn(&g, &rn, 3).unwrap().iter().zip(&base) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tanh_gate_is_exact() {
        assert_eq!(40f64.tanh(), 1.0);
        let f = gate_mlp(Question, 2);
        assert_eq!(f.forward_onehot(0, 3, &[0.3, -2.0]).unwrap()[0], 0.0);
        assert_eq!(f.forward_onehot(2, 3, &[0.3, -2.0]).unwrap()[0], -1e30);
    }

    #[test]
    fn encoder_reproduces_khop_rn() {
        for seed in 0..50u64 {
            let mut rng = Rng::new(seed);
            let n = 4 + rng.below(7);
            let m = 1 + rng.below(3);
            let k = 1 + rng.below(3);
            let g = synth::answer_reachable(n, m, 0.1, &mut rng);
            let rn = RnParams::random(n, m, 3, 2, 4, &mut rng);
            let eq = construct_equiv_params(&rn, k, 2).unwrap();
            let out = encode(&g, &eq.features, &[0.7, -0.1], &eq.params, &eq.config).unwrap();
            let want = khop_rn(&g, &rn, k).unwrap();
            for (a, b) in out.g_vec.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_width_relation_embeddings() {
        let mut rng = Rng::new(8);
        let g = synth::answer_reachable(6, 2, 0.1, &mut rng);
        let rn = RnParams::random(6, 2, 3, 0, 2, &mut rng);
        let eq = construct_equiv_params(&rn, 2, 1).unwrap();
        assert_eq!(eq.params.w[0][1], DenseMatrix::identity(3));
        let out = encode(&g, &eq.features, &[0.0], &eq.params, &eq.config).unwrap();
        for (a, b) in out.g_vec.iter().zip(&khop_rn(&g, &rn, 2).unwrap()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn no_question_answer_walk() {
        let g = MultiRelGraph::new(vec![Question, Answer, Other], None, 1, [(1, 1, 0), (2, 1, 0)]).unwrap();
        let mut rng = Rng::new(1);
        let rn = RnParams::random(3, 1, 2, 1, 2, &mut rng);
        assert!(matches!(khop_rn(&g, &rn, 2), Err(Error::NoPath(_))));
        let eq = construct_equiv_params(&rn, 2, 1).unwrap();
        let out = encode(&g, &eq.features, &[0.0], &eq.params, &eq.config).unwrap();
        // the encoder falls back to the shortcut V h_a
        assert_eq!(out.g_vec, eq.params.v.matvec(rn.h_tilde.row(1)).unwrap());
    }
}
