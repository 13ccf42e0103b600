//! Structured relational attention.
//!
//! A path `(j, r_1, ..., r_k, i)` is scored as
//! `alpha = beta(r_1..r_k, s) * gamma(type(j), type(i), s)` where
//! `beta = exp(sum_t delta(r_t, s) + sum_t tau(r_t, r_{t+1}))` and
//! `gamma = exp(f(type(j), s) + g(type(i), s))`. The weights are unnormalized;
//! the encoder divides by the per-(node, hop) total.
//!
//! `f`, `g` and `delta` are two-layer tanh MLPs fed a one-hot of the node type
//! (or relation) concatenated with the statement vector `s`. `tau` is an `m x m`
//! transition table that does not depend on `s`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numkit::{DenseMatrix, Mlp, Rng};
use crate::pathreason::ReasoningPath;
use crate::relgraph::{MultiRelGraph, NodeType};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub f_mlp: Mlp,
    pub g_mlp: Mlp,
    pub delta_mlp: Mlp,
    /// `tau[(r - 1, r' - 1)]` scores the transition `r -> r'`
    pub tau: DenseMatrix,
}

impl AttentionParams {
    /// All-zero networks: every path weight is exactly 1.
    pub fn zeros(m: usize, d_s: usize, h_att: usize) -> Self {
        Self {
            f_mlp: Mlp::zeros(NodeType::COUNT + d_s, h_att, 1),
            g_mlp: Mlp::zeros(NodeType::COUNT + d_s, h_att, 1),
            delta_mlp: Mlp::zeros(m + d_s, h_att, 1),
            tau: DenseMatrix::zeros(m, m),
        }
    }

    pub fn random(m: usize, d_s: usize, h_att: usize, rng: &mut Rng) -> Self {
        let f_mlp = Mlp::random(NodeType::COUNT + d_s, h_att, 1, rng);
        let g_mlp = Mlp::random(NodeType::COUNT + d_s, h_att, 1, rng);
        let delta_mlp = Mlp::random(m + d_s, h_att, 1, rng);
        let tau = DenseMatrix::from_vec(m, m, (0..m * m).map(|_| rng.uniform(-0.5, 0.5)).collect())
            .expect("square");
        Self { f_mlp, g_mlp, delta_mlp, tau }
    }

    pub fn m(&self) -> usize {
        self.tau.rows()
    }

    pub fn d_s(&self) -> usize {
        self.f_mlp.input_dim() - NodeType::COUNT
    }

    pub fn h_att(&self) -> usize {
        self.f_mlp.hidden_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d_s) = (self.m(), self.d_s());
        if self.tau.cols() != m {
            return dim_err(format!("tau is {:?}", self.tau.shape()));
        }
        if self.g_mlp.input_dim() != NodeType::COUNT + d_s || self.delta_mlp.input_dim() != m + d_s {
            return dim_err("attention MLP input widths disagree");
        }
        for mlp in [&self.f_mlp, &self.g_mlp, &self.delta_mlp] {
            if mlp.output_dim() != 1 || mlp.hidden_dim() == 0 {
                return dim_err("attention MLPs need a scalar output and a hidden layer");
            }
        }
        Ok(())
    }

    fn check_s(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.d_s() {
            return dim_err(format!("statement of {} for d_s = {}", s.len(), self.d_s()));
        }
        Ok(())
    }

    fn check_rel(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.m() {
            return Err(Error::BadRelationId { id: r, m: self.m() });
        }
        Ok(())
    }

    /// Source-type score `f(t, s)`.
    pub fn node_score_f(&self, t: NodeType, s: &[f64]) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.f_mlp.forward_onehot(t.index(), NodeType::COUNT, s)?[0])
    }

    /// Target-type score `g(t, s)`.
    pub fn node_score_g(&self, t: NodeType, s: &[f64]) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.g_mlp.forward_onehot(t.index(), NodeType::COUNT, s)?[0])
    }

    pub fn rel_score_delta(&self, r: usize, s: &[f64]) -> Result<f64> {
        self.check_rel(r)?;
        self.check_s(s)?;
        Ok(self.delta_mlp.forward_onehot(r - 1, self.m(), s)?[0])
    }

    pub fn transition(&self, from: usize, to: usize) -> Result<f64> {
        self.check_rel(from)?;
        self.check_rel(to)?;
        Ok(self.tau.get(from - 1, to - 1))
    }

    /// Relation-type attention for a relation sequence.
    pub fn beta(&self, rels: &[usize], s: &[f64]) -> Result<f64> {
        if rels.is_empty() {
            return Err(Error::InvalidPath("empty relation sequence".into()));
        }
        let mut total = 0.0;
        for &r in rels {
            total += self.rel_score_delta(r, s)?;
        }
        for w in rels.windows(2) {
            total += self.transition(w[0], w[1])?;
        }
        Ok(total.exp())
    }

    /// Node-type attention.
    pub fn gamma(&self, src: NodeType, dst: NodeType, s: &[f64]) -> Result<f64> {
        Ok((self.node_score_f(src, s)? + self.node_score_g(dst, s)?).exp())
    }

    /// Unnormalized attention weight of a walk; fails if any step is not an edge.
    pub fn alpha_path(&self, path: &ReasoningPath, graph: &MultiRelGraph, s: &[f64]) -> Result<f64> {
        path.validate(graph)?;
        let beta = self.beta(&path.rels, s)?;
        let gamma = self.gamma(graph.node_type(path.source), graph.node_type(path.target), s)?;
        Ok(beta * gamma)
    }

    /// Evaluates every score the dynamic programs need for one statement.
    pub fn table(&self, s: &[f64]) -> Result<ScoreTable> {
        self.check_s(s)?;
        let mut f = [0.0; 3];
        let mut g = [0.0; 3];
        for t in NodeType::ALL {
            f[t.index()] = self.node_score_f(t, s)?;
            g[t.index()] = self.node_score_g(t, s)?;
        }
        let delta = (1..=self.m()).map(|r| self.rel_score_delta(r, s)).collect::<Result<_>>()?;
        Ok(ScoreTable { f, g, delta, tau: self.tau.clone() })
    }
}

/// Attention scores precomputed for one statement vector, in log space.
#[derive(Clone, Debug)]
pub struct ScoreTable {
    /// indexed by `NodeType::index`
    pub f: [f64; 3],
    pub g: [f64; 3],
    /// indexed by `r - 1`
    pub delta: Vec<f64>,
    pub tau: DenseMatrix,
}

impl ScoreTable {
    pub fn m(&self) -> usize {
        self.delta.len()
    }
}
