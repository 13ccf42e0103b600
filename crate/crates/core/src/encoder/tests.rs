use proptest::prelude::*;

use super::*;
use crate::numkit::{glorot_init, Rng};
use crate::pathreason::{brute_force_zk, enumerate_paths};
use crate::relgraph::NodeType::*;
use crate::synth;

fn dims(d_in: usize, d: usize, d_out: usize, d_s: usize, k: usize, m: usize, seed: u64) -> ModelDims {
    ModelDims { d_in, d, d_out, d_s, k, m, h_att: 4, rho_hidden: 5, seed, ..Default::default() }
}

fn random_vec(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

struct Setup {
    graph: MultiRelGraph,
    h: DenseMatrix,
    s: Vec<f64>,
    params: ModelParams,
}

fn setup(seed: u64, n: usize, m: usize, k: usize, p_edge: f64) -> Setup {
    let mut rng = Rng::new(seed);
    let graph = synth::bernoulli(n, m, p_edge, &mut rng);
    let params = ModelParams::random(dims(5, 4, 3, 3, k, m, seed));
    let h = glorot_init(n, 5, &mut rng);
    let s = random_vec(3, &mut rng);
    Setup { graph, h, s, params }
}

fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
    let diff = a.max_abs_diff(b);
    assert!(diff < tol, "max abs diff {diff:e} >= {tol:e}");
}

// ---- type transform ----

#[test]
fn type_transform_identity() {
    let mut p = ModelParams::neutral(dims(2, 2, 2, 1, 1, 1, 0));
    let h = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let cfg = EncoderConfig::new(1);
    assert_eq!(type_transform(&h, &[Question, Other], &p, &cfg).unwrap(), h);
    p.u[Question.index()] = DenseMatrix::diag(&[2.0, 2.0]);
    let h = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
    assert_eq!(type_transform(&h, &[Question], &p, &cfg).unwrap().row(0), &[2.0, 2.0]);
}

#[test]
fn type_transform_matches_row_oracle() {
    let mut st = setup(13, 3, 2, 2, 0.5);
    for b in st.params.b.iter_mut() {
        b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64 - 0.05);
    }
    let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(2)).unwrap();
    for i in 0..3 {
        let t = st.graph.node_type(i).index();
        for o in 0..4 {
            let mut want = st.params.b[t][o];
            for c in 0..5 {
                want += st.params.u[t].get(o, c) * st.h.get(i, c);
            }
            assert!((x.get(i, o) - want).abs() < 1e-14);
        }
    }
    assert!(type_transform(&DenseMatrix::zeros(2, 5), st.graph.phi(), &st.params, &EncoderConfig::new(2)).is_err());
}

// ---- multi-hop pass ----

#[test]
fn no_edges_all_masked() {
    let g = MultiRelGraph::new(vec![Question, Answer, Other], None, 2, []).unwrap();
    let p = ModelParams::random(dims(2, 2, 2, 1, 2, 2, 1));
    let x = DenseMatrix::filled(3, 2, 1.0);
    let out = multihop_pass(&x, &g, &[0.5], &p, 2).unwrap();
    for k in 1..=2 {
        assert_eq!(out.z[k - 1], DenseMatrix::zeros(3, 2));
        assert!((0..3).all(|i| out.is_masked(k, i)));
    }
}

#[test]
fn single_edge_identity() {
    let g = MultiRelGraph::new(vec![Question, Answer], None, 1, [(0, 1, 1)]).unwrap();
    let p = ModelParams::neutral(dims(2, 2, 2, 1, 1, 1, 0));
    let x = DenseMatrix::from_rows(&[[0.3, -0.7], [5.0, 5.0]]).unwrap();
    let out = multihop_pass(&x, &g, &[0.0], &p, 1).unwrap();
    assert_eq!(out.z[0].row(1), &[0.3, -0.7]);
    assert_eq!(out.z[0].row(0), &[0.0, 0.0]);
    assert_eq!(out.d_norm[0], vec![0.0, 1.0]);
}

#[test]
fn seed13_matches_brute_force() {
    let st = setup(13, 8, 3, 3, 0.12);
    let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(3)).unwrap();
    let dp = multihop_pass(&x, &st.graph, &st.s, &st.params, 3).unwrap();
    for k in 1..=3 {
        let (z, d) = brute_force_zk(&st.graph, &x, &st.s, &st.params, k, 3).unwrap();
        assert_close(&dp.z[k - 1], &z, 1e-9);
        for (a, b) in dp.d_norm[k - 1].iter().zip(&d) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
    assert!(dp.d_norm[2].iter().any(|v| *v > 0.0), "graph should have 3-hop walks");
}

#[test]
fn padding_enters_only_through_what() {
    let mut st = setup(21, 6, 2, 3, 0.25);
    let mut rng = Rng::new(99);
    for t in 0..3 {
        for r in 1..=2 {
            st.params.w[t][r] = DenseMatrix::identity(4);
        }
        st.params.w[t][0] = glorot_init(4, 4, &mut rng);
    }
    let mut plain = st.params.clone();
    for t in 0..3 {
        plain.w[t][0] = DenseMatrix::identity(4);
    }
    let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(3)).unwrap();
    let padded = multihop_pass(&x, &st.graph, &st.s, &st.params, 3).unwrap();
    let bare = multihop_pass(&x, &st.graph, &st.s, &plain, 3).unwrap();
    for k in 1..=3 {
        for i in 0..6 {
            // W_0^K ... W_0^{k+1} applied to the column vector, innermost first
            let mut v = bare.z[k - 1].row(i).to_vec();
            for t in k + 1..=3 {
                v = st.params.w[t - 1][0].matvec(&v).unwrap();
            }
            for (a, b) in padded.z[k - 1].row(i).iter().zip(&v) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn overflow_is_reported() {
    let mut st = setup(3, 5, 2, 2, 0.5);
    st.params.att.f_mlp.b2[0] = 800.0;
    let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(2)).unwrap();
    let err = multihop_pass(&x, &st.graph, &st.s, &st.params, 2).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dp_equals_enumeration(seed in any::<u64>(), n in 2usize..=12, m in 1usize..=5, k in 1usize..=3) {
        let p_edge = 1.5 / (n as f64 * m as f64);
        let st = setup(seed, n, m, k, p_edge);
        let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(k)).unwrap();
        let dp = multihop_pass(&x, &st.graph, &st.s, &st.params, k).unwrap();
        for hop in 1..=k {
            let (z, d) = brute_force_zk(&st.graph, &x, &st.s, &st.params, hop, k).unwrap();
            prop_assert!(dp.z[hop - 1].max_abs_diff(&z) < 1e-9);
            for (a, b) in dp.d_norm[hop - 1].iter().zip(&d) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalizer_sums_alpha(seed in any::<u64>(), n in 2usize..=8, m in 1usize..=3) {
        let st = setup(seed, n, m, 3, 2.0 / (n * m) as f64);
        let x = type_transform(&st.h, st.graph.phi(), &st.params, &EncoderConfig::new(3)).unwrap();
        let dp = multihop_pass(&x, &st.graph, &st.s, &st.params, 3).unwrap();
        let mut sums = vec![vec![0.0; n]; 3];
        for path in enumerate_paths(&st.graph, 3, None, None) {
            sums[path.k() - 1][path.target] += st.params.att.alpha_path(&path, &st.graph, &st.s).unwrap();
        }
        for k in 0..3 {
            for i in 0..n {
                if sums[k][i] > 0.0 {
                    prop_assert!((sums[k][i] / dp.d_norm[k][i] - 1.0).abs() < 1e-9);
                } else {
                    prop_assert_eq!(dp.d_norm[k][i], 0.0);
                }
            }
        }
    }

    #[test]
    fn unreachable_nodes_keep_shortcut(seed in any::<u64>()) {
        let st = setup(seed, 7, 2, 2, 0.08);
        let cfg = EncoderConfig::new(2);
        let out = encode(&st.graph, &st.h, &st.s, &st.params, &cfg);
        let Ok(out) = out else { return Ok(()) };
        let shortcut = st.h.matmul_t(&st.params.v).unwrap().map(f64::tanh);
        for i in 0..7 {
            if out.d_norm.iter().all(|d| d[i] == 0.0) {
                prop_assert_eq!(out.hprime.row(i), shortcut.row(i));
            }
        }
    }
}

// ---- hop attention ----

fn hops_from(z: Vec<DenseMatrix>, d: Vec<Vec<f64>>) -> HopMessages {
    HopMessages { z, d_norm: d }
}

#[test]
fn single_hop_weight_is_one() {
    let p = ModelParams::random(dims(2, 2, 2, 2, 1, 1, 4));
    let z1 = DenseMatrix::from_rows(&[[0.5, 0.25]]).unwrap();
    let (z, w) = hop_attention(&[0.3, 0.1], &hops_from(vec![z1.clone()], vec![vec![1.0]]), &p).unwrap();
    assert_eq!(z, z1);
    assert_eq!(w.get(0, 0), 1.0);
}

#[test]
fn zero_bilinear_is_uniform_over_unmasked() {
    let p = ModelParams::neutral(dims(2, 2, 2, 1, 3, 1, 0));
    let zs = vec![
        DenseMatrix::from_rows(&[[3.0, 0.0]]).unwrap(),
        DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap(),
        DenseMatrix::from_rows(&[[1.0, 6.0]]).unwrap(),
    ];
    let (z, w) = hop_attention(&[1.0], &hops_from(zs, vec![vec![2.0], vec![0.0], vec![1.0]]), &p).unwrap();
    assert_eq!(w.row(0), &[0.5, 0.0, 0.5]);
    assert_eq!(z.row(0), &[2.0, 3.0]);
}

#[test]
fn ln3_score_gap_gives_three_to_one() {
    let mut p = ModelParams::neutral(dims(1, 1, 1, 1, 2, 1, 0));
    p.b_hop = DenseMatrix::from_rows(&[[1.0]]).unwrap();
    let gap = 3f64.ln();
    let zs = vec![
        DenseMatrix::from_rows(&[[0.2 + gap]]).unwrap(),
        DenseMatrix::from_rows(&[[0.2]]).unwrap(),
    ];
    let (_, w) = hop_attention(&[1.0], &hops_from(zs, vec![vec![1.0], vec![1.0]]), &p).unwrap();
    assert!((w.get(0, 0) - 0.75).abs() < 1e-12);
    assert!((w.get(0, 1) - 0.25).abs() < 1e-12);
}

// ---- activation and pooling ----

#[test]
fn activation_examples() {
    let mut p = ModelParams::random(dims(2, 2, 2, 1, 1, 1, 8));
    let h = DenseMatrix::from_rows(&[[0.4, -1.2], [2.0, 0.1]]).unwrap();
    let z = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, -3.0]]).unwrap();
    let v = p.v.clone();
    let vp = p.v_prime.clone();
    let out = activate(&h, &z, &p, Activation::Tanh).unwrap();
    for i in 0..2 {
        for o in 0..2 {
            let pre = v.get(o, 0) * h.get(i, 0) + v.get(o, 1) * h.get(i, 1)
                + vp.get(o, 0) * z.get(i, 0) + vp.get(o, 1) * z.get(i, 1);
            assert!((out.get(i, o) - pre.tanh()).abs() < 1e-15);
        }
    }
    p.v = DenseMatrix::zeros(2, 2);
    p.v_prime = DenseMatrix::zeros(2, 2);
    assert_eq!(activate(&h, &z, &p, Activation::Tanh).unwrap(), DenseMatrix::zeros(2, 2));
    p.v = DenseMatrix::identity(2);
    assert_eq!(activate(&h, &z, &p, Activation::Identity).unwrap(), h);
}

#[test]
fn pooling_examples() {
    let mut p = ModelParams::random(dims(2, 2, 2, 2, 1, 1, 8));
    let hp = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 8.0]]).unwrap();
    let s = [0.5, -0.5];
    let (g, w) = pool_answer(&hp, &[Question, Answer, Other], &s, &p).unwrap();
    assert_eq!(g, vec![3.0, 4.0]);
    assert_eq!(w, vec![0.0, 1.0, 0.0]);
    p.p_pool = DenseMatrix::zeros(2, 2);
    let (g, _) = pool_answer(&hp, &[Answer, Other, Answer], &s, &p).unwrap();
    assert_eq!(g, vec![3.0, 5.0]);
    assert!(matches!(pool_answer(&hp, &[Question, Other, Other], &s, &p), Err(Error::NoAnswerNodes)));
}

// ---- full pipeline ----

#[test]
fn edgeless_graph_is_pure_shortcut() {
    let p = ModelParams::random(dims(3, 4, 2, 2, 2, 2, 5));
    let g = MultiRelGraph::new(vec![Answer], None, 2, []).unwrap();
    let h = DenseMatrix::from_rows(&[[0.3, 0.2, -0.9]]).unwrap();
    let out = encode(&g, &h, &[0.1, 0.2], &p, &EncoderConfig::new(2)).unwrap();
    let want: Vec<f64> = p.v.matvec(h.row(0)).unwrap().into_iter().map(f64::tanh).collect();
    assert_eq!(out.g_vec, want);
}

#[test]
fn chain_pipeline_matches_stage_oracles() {
    let graph = synth::chain(3);
    let params = ModelParams::random(dims(5, 4, 3, 3, 3, 2, 13));
    let mut rng = Rng::new(13);
    let h = glorot_init(3, 5, &mut rng);
    let s = random_vec(3, &mut rng);
    let cfg = EncoderConfig::new(3);
    let out = encode(&graph, &h, &s, &params, &cfg).unwrap();

    // stage 1: row-wise affine map
    let mut x = DenseMatrix::zeros(3, 4);
    for i in 0..3 {
        let t = graph.node_type(i).index();
        let row = params.u[t].matvec(h.row(i)).unwrap();
        for o in 0..4 {
            x.set(i, o, row[o] + params.b[t][o]);
        }
    }
    assert_close(&out.x, &x, 1e-14);
    // stage 2: enumeration
    let zs: Vec<(DenseMatrix, Vec<f64>)> =
        (1..=3).map(|k| brute_force_zk(&graph, &x, &s, &params, k, 3).unwrap()).collect();
    // stage 3: scalar softmax per node
    let q = params.b_hop.t_matvec(&s).unwrap();
    let mut z = DenseMatrix::zeros(3, 4);
    for i in 0..3 {
        let live: Vec<usize> = (0..3).filter(|&k| zs[k].1[i] > 0.0).collect();
        let scores: Vec<f64> =
            live.iter().map(|&k| (0..4).map(|c| q[c] * zs[k].0.get(i, c)).sum::<f64>()).collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = scores.iter().map(|v| (v - mx).exp()).sum();
        for (idx, &k) in live.iter().enumerate() {
            let w = (scores[idx] - mx).exp() / total;
            for c in 0..4 {
                z.set(i, c, z.get(i, c) + w * zs[k].0.get(i, c));
            }
        }
    }
    assert_close(&out.z, &z, 1e-9);
    // stage 4 and 5: single answer node, so g is its embedding
    let pre: Vec<f64> = params
        .v
        .matvec(h.row(2))
        .unwrap()
        .iter()
        .zip(params.v_prime.matvec(z.row(2)).unwrap())
        .map(|(a, b)| (a + b).tanh())
        .collect();
    for (a, b) in out.g_vec.iter().zip(&pre) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn each_ablation_changes_output() {
    let mut rng = Rng::new(13);
    let graph = synth::bernoulli(10, 3, 0.15, &mut rng);
    let params = ModelParams::random(dims(5, 4, 3, 3, 3, 3, 13));
    let h = glorot_init(10, 5, &mut rng);
    let s = random_vec(3, &mut rng);
    let full = encode(&graph, &h, &s, &params, &EncoderConfig::new(3)).unwrap();
    for flag in ["type-transform", "rel-attention", "node-attention", "type-transform,rel-attention,node-attention"] {
        let cfg = EncoderConfig::new(3).ablate(flag).unwrap();
        let out = encode(&graph, &h, &s, &params, &cfg).unwrap();
        assert!(full.hprime.max_abs_diff(&out.hprime) > 1e-6, "{flag}");
    }
}

#[test]
fn encode_invariants() {
    let st = setup(5, 9, 3, 3, 0.2);
    let out = encode(&st.graph, &st.h, &st.s, &st.params, &EncoderConfig::new(3)).unwrap();
    for i in 0..9 {
        let total: f64 = out.hop_weights.row(i).iter().sum();
        let live = (0..3).any(|k| out.d_norm[k][i] != 0.0);
        assert!(if live { (total - 1.0).abs() < 1e-12 } else { total == 0.0 });
        for k in 0..3 {
            if out.d_norm[k][i] == 0.0 {
                assert!(out.z_hops[k].row(i).iter().all(|v| *v == 0.0));
                assert_eq!(out.hop_weights.get(i, k), 0.0);
            }
        }
    }
    let pooled: f64 = out.pool_weights.iter().sum();
    assert!((pooled - 1.0).abs() < 1e-12);
}
