//! Walk enumeration, walk counting, the brute-force message passing oracle and
//! reasoning path decoding.
//!
//! Paths here are walks: nodes may repeat, and only edge validity is required.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::encoder::{EncoderConfig, EncoderOutput, ModelParams};
use crate::error::{dim_err, Error, Result};
use crate::numkit::{axpy, DenseMatrix};
use crate::relgraph::{MultiRelGraph, RelationVocab};

/// A walk `source -r_1-> v_1 -r_2-> ... -r_k-> target`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReasoningPath {
    pub source: usize,
    pub rels: Vec<usize>,
    /// `k - 1` interior nodes
    pub intermediates: Vec<usize>,
    pub target: usize,
    /// attention weight `alpha`, when computed
    pub score: Option<f64>,
}

impl ReasoningPath {
    pub fn new(source: usize, rels: Vec<usize>, intermediates: Vec<usize>, target: usize) -> Self {
        Self { source, rels, intermediates, target, score: None }
    }

    pub fn k(&self) -> usize {
        self.rels.len()
    }

    /// Every node on the walk, endpoints included.
    pub fn nodes(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.k() + 1);
        v.push(self.source);
        v.extend_from_slice(&self.intermediates);
        v.push(self.target);
        v
    }

    pub fn validate(&self, graph: &MultiRelGraph) -> Result<()> {
        if self.rels.is_empty() || self.intermediates.len() + 1 != self.rels.len() {
            return Err(Error::InvalidPath(format!(
                "{} relations with {} interior nodes",
                self.rels.len(),
                self.intermediates.len()
            )));
        }
        let nodes = self.nodes();
        for (t, &r) in self.rels.iter().enumerate() {
            let (j, i) = (nodes[t], nodes[t + 1]);
            if !graph.has_edge(j, r, i) {
                return Err(Error::InvalidPath(format!("missing edge ({j}, {r}, {i})")));
            }
        }
        Ok(())
    }

    /// Canonical order: hop count, source, relations, interior nodes, target.
    pub fn order_key(&self) -> (usize, usize, &[usize], &[usize], usize) {
        (self.k(), self.source, &self.rels, &self.intermediates, self.target)
    }

    pub fn to_json(&self, vocab: Option<&RelationVocab>) -> Value {
        let rels: Vec<String> = self
            .rels
            .iter()
            .map(|&r| vocab.map_or_else(|| format!("r{r}"), |v| v.name(r)))
            .collect();
        json!({
            "source": self.source,
            "rels": rels,
            "intermediates": self.intermediates,
            "target": self.target,
            "score": self.score,
            "k": self.k(),
        })
    }
}

fn walk_from(
    graph: &MultiRelGraph,
    len: usize,
    rels: &mut Vec<usize>,
    nodes: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize], &[usize]),
) {
    if rels.len() == len {
        visit(nodes, rels);
        return;
    }
    let here = *nodes.last().expect("walk has a start");
    for &(r, next) in graph.out_edges(here) {
        rels.push(r);
        nodes.push(next);
        walk_from(graph, len, rels, nodes, visit);
        rels.pop();
        nodes.pop();
    }
}

/// Calls `visit(nodes, rels)` for every walk of exactly `len` steps starting in
/// `sources` (all nodes when `None`). `nodes` has `len + 1` entries.
pub fn for_each_walk(
    graph: &MultiRelGraph,
    len: usize,
    sources: Option<&BTreeSet<usize>>,
    mut visit: impl FnMut(&[usize], &[usize]),
) {
    let mut rels = Vec::with_capacity(len);
    let mut nodes = Vec::with_capacity(len + 1);
    for j in 0..graph.n() {
        if sources.is_some_and(|s| !s.contains(&j)) {
            continue;
        }
        nodes.push(j);
        walk_from(graph, len, &mut rels, &mut nodes, &mut visit);
        nodes.pop();
    }
}

/// All walks of 1..=`k_max` steps, optionally filtered by endpoints, in
/// canonical order. Scores are left unset.
pub fn enumerate_paths(
    graph: &MultiRelGraph,
    k_max: usize,
    src_filter: Option<&BTreeSet<usize>>,
    dst_filter: Option<&BTreeSet<usize>>,
) -> Vec<ReasoningPath> {
    let mut out = Vec::new();
    for k in 1..=k_max {
        let start = out.len();
        for_each_walk(graph, k, src_filter, |nodes, rels| {
            let target = nodes[k];
            if dst_filter.is_some_and(|d| !d.contains(&target)) {
                return;
            }
            out.push(ReasoningPath::new(nodes[0], rels.to_vec(), nodes[1..k].to_vec(), target));
        });
        out[start..].sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    }
    out
}

/// Number of walks of each length `1..=k_max`, by repeated multiplication with
/// the relation-summed adjacency (`1^T A^k 1`), without enumerating.
pub fn count_paths(graph: &MultiRelGraph, k_max: usize) -> Result<Vec<u64>> {
    let n = graph.n();
    let mut ends = vec![1u64; n];
    let mut counts = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut next = vec![0u64; n];
        for (j, _, i) in graph.triples() {
            next[i] = next[i].checked_add(ends[j]).ok_or(Error::Overflow(k))?;
        }
        let total = next.iter().try_fold(0u64, |acc, &v| acc.checked_add(v)).ok_or(Error::Overflow(k))?;
        counts.push(total);
        ends = next;
    }
    Ok(counts)
}

/// Literal evaluation of `k`-hop message passing: every walk of length `k`
/// contributes `alpha * W_0^K ... W_0^{k+1} W_{r_k}^k ... W_{r_1}^1 x_j` to its
/// end node, and the sums are divided by the per-node total `alpha`.
///
/// `params` must already have ablations applied. Exponential in `k`; meant as
/// an oracle for small graphs.
pub fn brute_force_zk(
    graph: &MultiRelGraph,
    x: &DenseMatrix,
    s: &[f64],
    params: &ModelParams,
    k: usize,
    k_total: usize,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let (n, d) = (graph.n(), params.header.d);
    if x.shape() != (n, d) {
        return dim_err(format!("X is {:?}, expected ({n}, {d})", x.shape()));
    }
    if k == 0 || k > k_total || k_total > params.w.len() {
        return Err(Error::InvalidArgument(format!("hop {k} of {k_total}")));
    }
    let mut z = DenseMatrix::zeros(n, d);
    let mut norm = vec![0.0; n];
    let mut failure = None;
    for_each_walk(graph, k, None, |nodes, rels| {
        if failure.is_some() {
            return;
        }
        let path = ReasoningPath::new(nodes[0], rels.to_vec(), nodes[1..k].to_vec(), nodes[k]);
        let alpha = match params.att.alpha_path(&path, graph, s) {
            Ok(a) => a,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let mut v = x.row(path.source).to_vec();
        for (t, &r) in rels.iter().enumerate() {
            v = params.w[t][r].matvec(&v).expect("square");
        }
        for t in k..k_total {
            v = params.w[t][0].matvec(&v).expect("square");
        }
        axpy(z.row_mut(path.target), alpha, &v);
        norm[path.target] += alpha;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    for (i, total) in norm.iter().enumerate() {
        let scale = if *total == 0.0 { 0.0 } else { 1.0 / total };
        z.row_mut(i).iter_mut().for_each(|v| *v *= scale);
    }
    Ok((z, norm))
}

#[derive(Clone)]
struct Partial {
    score: f64,
    source: usize,
    rels: Vec<usize>,
    intermediates: Vec<usize>,
}

impl Partial {
    /// Higher score wins; exact ties go to the canonically smaller walk.
    fn beats(&self, other: &Partial) -> bool {
        match self.score.partial_cmp(&other.score) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => {
                (self.source, &self.rels, &self.intermediates)
                    < (other.source, &other.rels, &other.intermediates)
            }
        }
    }
}

fn offer(slot: &mut Option<Partial>, cand: Partial) {
    if slot.as_ref().is_none_or(|cur| cand.beats(cur)) {
        *slot = Some(cand);
    }
}

/// Highest-`alpha` walk of exactly `k` steps ending at `target`, by max-product
/// over `(node, last relation)` states. `None` if no such walk exists.
pub fn best_path_to(
    graph: &MultiRelGraph,
    target: usize,
    k: usize,
    s: &[f64],
    params: &ModelParams,
) -> Result<Option<ReasoningPath>> {
    if k == 0 {
        return Err(Error::InvalidArgument("walk length 0".into()));
    }
    let table = params.att.table(s)?;
    let (n, m) = (graph.n(), graph.m());
    if m != table.m() {
        return dim_err(format!("graph has {m} relations, parameters {}", table.m()));
    }
    let state = |v: usize, r: usize| v * m + (r - 1);
    let mut states: Vec<Option<Partial>> = vec![None; n * m];
    for r in 1..=m {
        for &(j, i) in graph.edges(r) {
            let cand = Partial {
                score: table.f[graph.node_type(j).index()] + table.delta[r - 1],
                source: j,
                rels: vec![r],
                intermediates: vec![],
            };
            offer(&mut states[state(i, r)], cand);
        }
    }
    for _ in 1..k {
        let mut next: Vec<Option<Partial>> = vec![None; n * m];
        for u in 0..n {
            for rp in 1..=m {
                let Some(prev) = &states[state(u, rp)] else { continue };
                for &(r, v) in graph.out_edges(u) {
                    let mut cand = prev.clone();
                    cand.score += table.tau.get(rp - 1, r - 1) + table.delta[r - 1];
                    cand.rels.push(r);
                    cand.intermediates.push(u);
                    offer(&mut next[state(v, r)], cand);
                }
            }
        }
        states = next;
    }
    let mut best: Option<Partial> = None;
    for r in 1..=m {
        if let Some(p) = states[state(target, r)].take() {
            offer(&mut best, p);
        }
    }
    let Some(best) = best else { return Ok(None) };
    let mut path = ReasoningPath::new(best.source, best.rels, best.intermediates, target);
    path.score = Some(params.att.alpha_path(&path, graph, s)?);
    Ok(Some(path))
}

/// Decodes the evidence path for an encoded graph: the top pooled answer node,
/// its top-weighted hop count, then the best walk of that length into it.
/// Ties at every level go to the lowest index / canonically first walk.
pub fn decode_path(
    graph: &MultiRelGraph,
    output: &EncoderOutput,
    s: &[f64],
    params: &ModelParams,
    config: &EncoderConfig,
) -> Result<ReasoningPath> {
    let params = config.apply(params);
    let answer = argmax(&output.pool_weights).ok_or(Error::NoAnswerNodes)?;
    if graph.node_type(answer) != crate::relgraph::NodeType::Answer {
        return Err(Error::NoAnswerNodes);
    }
    let row = output.hop_weights.row(answer);
    let k = match argmax(row) {
        Some(h) if row[h] > 0.0 => h + 1,
        _ => return Err(Error::NoPath(format!("every hop is masked at answer node {answer}"))),
    };
    best_path_to(graph, answer, k, s, &params)?
        .ok_or_else(|| Error::NoPath(format!("no {k}-hop walk ends at node {answer}")))
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|b| *x > v[b]) {
            best = Some(i);
        }
    }
    best
}
