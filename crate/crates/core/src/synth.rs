//! Synthetic graphs: `complete:n`, `chain:n`, `erdos:n:deg:m`.

use crate::error::{Error, Result};
use crate::numkit::Rng;
use crate::relgraph::{MultiRelGraph, NodeType};

/// Complete digraph without self loops, one relation, all nodes untyped.
pub fn complete(n: usize) -> MultiRelGraph {
    let edges = (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, 1, i)));
    MultiRelGraph::new(vec![NodeType::Other; n], None, 1, edges).expect("valid")
}

/// Path `0 -> 1 -> ... -> n-1` on relation 1 with reverse edges on relation 2.
/// The first node is a question node, the last an answer node.
pub fn chain(n: usize) -> MultiRelGraph {
    let mut phi = vec![NodeType::Other; n];
    if n > 0 {
        phi[0] = NodeType::Question;
        phi[n - 1] = NodeType::Answer;
    }
    let edges = (1..n).flat_map(|i| [(i - 1, 1, i), (i, 2, i - 1)]);
    MultiRelGraph::new(phi, None, 2, edges).expect("valid")
}

/// Random node types with at least one question and one answer node when `n >= 2`.
pub fn random_types(n: usize, rng: &mut Rng) -> Vec<NodeType> {
    let mut phi: Vec<NodeType> = (0..n).map(|_| NodeType::ALL[rng.below(3)]).collect();
    if n >= 2 {
        phi[0] = NodeType::Question;
        phi[1] = NodeType::Answer;
    }
    phi
}

/// `round(n * deg)` distinct random edges `(j, r, i)` with `j != i` and `r`
/// uniform in `1..=m`, so the mean out-degree is `deg`.
pub fn erdos(n: usize, deg: f64, m: usize, seed: u64) -> Result<MultiRelGraph> {
    if n < 2 || m == 0 || deg < 0.0 {
        return Err(Error::InvalidArgument(format!("erdos graph with n={n}, deg={deg}, m={m}")));
    }
    let max_edges = n * (n - 1) * m;
    let want = ((n as f64) * deg).round() as usize;
    if want > max_edges {
        return Err(Error::InvalidArgument(format!("{want} edges exceed the {max_edges} possible")));
    }
    let mut rng = Rng::new(seed);
    let phi = random_types(n, &mut rng);
    let mut seen = std::collections::HashSet::with_capacity(want);
    let mut edges = Vec::with_capacity(want);
    while edges.len() < want {
        let j = rng.below(n);
        let i = rng.below(n);
        let r = 1 + rng.below(m);
        if j != i && seen.insert((j, r, i)) {
            edges.push((j, r, i));
        }
    }
    MultiRelGraph::new(phi, None, m, edges)
}

/// Each ordered pair and relation carries an edge with probability `p`.
pub fn bernoulli(n: usize, m: usize, p: f64, rng: &mut Rng) -> MultiRelGraph {
    let phi = random_types(n, rng);
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            for r in 1..=m {
                if i != j && rng.bernoulli(p) {
                    edges.push((j, r, i));
                }
            }
        }
    }
    MultiRelGraph::new(phi, None, m, edges).expect("valid")
}

/// Random graph in which every answer node is reached from some question node
/// by walks of every length: each answer `a` gets a question partner `q` and a
/// bridge `u` with edges `q -> a`, `a -> q`, `q -> u` and `u -> a`, on top of
/// Bernoulli(`p`) noise edges. Needs `n >= 3`.
pub fn answer_reachable(n: usize, m: usize, p: f64, rng: &mut Rng) -> MultiRelGraph {
    assert!(n >= 3 && m >= 1);
    let noise = bernoulli(n, m, p, rng);
    let phi = noise.phi().to_vec();
    let questions: Vec<usize> = (0..n).filter(|&v| phi[v] == NodeType::Question).collect();
    let mut edges: Vec<(usize, usize, usize)> = noise.triples().collect();
    for a in (0..n).filter(|&v| phi[v] == NodeType::Answer) {
        let q = questions[rng.below(questions.len())];
        let u = loop {
            let u = rng.below(n);
            if u != q && u != a {
                break u;
            }
        };
        let mut rel = || 1 + rng.below(m);
        edges.extend([(q, rel(), a), (a, rel(), q), (q, rel(), u), (u, rel(), a)]);
    }
    MultiRelGraph::new(phi, None, m, edges).expect("valid")
}

/// Parses `complete:n`, `chain:n` or `erdos:n:deg:m[:seed]`.
pub fn parse(spec: &str) -> Result<MultiRelGraph> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidArgument(format!("bad synthetic graph spec `{spec}`"));
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        ["complete", n] => Ok(complete(int(n)?)),
        ["chain", n] => Ok(chain(int(n)?)),
        ["erdos", n, deg, m] => erdos(int(n)?, deg.parse().map_err(|_| bad())?, int(m)?, 0),
        ["erdos", n, deg, m, seed] => erdos(
            int(n)?,
            deg.parse().map_err(|_| bad())?,
            int(m)?,
            seed.parse().map_err(|_| bad())?,
        ),
        _ => Err(bad()),
    }
}
