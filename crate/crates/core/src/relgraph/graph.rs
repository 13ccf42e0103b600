use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a node in the contextualized graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    /// mentioned in the question
    #[serde(rename = "q")]
    Question,
    /// mentioned in the answer option
    #[serde(rename = "a")]
    Answer,
    #[serde(rename = "o")]
    Other,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Question, NodeType::Answer, NodeType::Other];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            NodeType::Question => 0,
            NodeType::Answer => 1,
            NodeType::Other => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            NodeType::Question => "q",
            NodeType::Answer => "a",
            NodeType::Other => "o",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "q" => Ok(NodeType::Question),
            "a" => Ok(NodeType::Answer),
            "o" => Ok(NodeType::Other),
            other => Err(Error::InvalidArgument(format!("unknown node tag `{other}`"))),
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Directed multi-relational graph with typed nodes.
///
/// Edges are stored per relation, sorted by `(source, target)` and free of
/// duplicates. Relation ids run `1..=m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRelGraph {
    m: usize,
    phi: Vec<NodeType>,
    node_kg_ids: Vec<usize>,
    edges_by_rel: Vec<Vec<(usize, usize)>>,
    /// per source node, sorted `(relation, target)`
    out_adj: Vec<Vec<(usize, usize)>>,
}

impl MultiRelGraph {
    pub fn new(
        phi: Vec<NodeType>,
        node_kg_ids: Option<Vec<usize>>,
        m: usize,
        edges: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self> {
        let n = phi.len();
        let node_kg_ids = node_kg_ids.unwrap_or_else(|| (0..n).collect());
        if node_kg_ids.len() != n {
            return Err(Error::DimMismatch(format!("{} kg ids for {n} nodes", node_kg_ids.len())));
        }
        let mut edges_by_rel = vec![Vec::new(); m];
        for (j, r, i) in edges {
            if r == 0 || r > m {
                return Err(Error::BadRelationId { id: r, m });
            }
            if j >= n || i >= n {
                return Err(Error::InvalidArgument(format!("edge ({j}, {r}, {i}) with {n} nodes")));
            }
            edges_by_rel[r - 1].push((j, i));
        }
        let mut out_adj = vec![Vec::new(); n];
        for (ri, list) in edges_by_rel.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &(j, i) in list.iter() {
                out_adj[j].push((ri + 1, i));
            }
        }
        // relations were visited in increasing order, so each list is sorted
        Ok(Self { m, phi, node_kg_ids, edges_by_rel, out_adj })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn phi(&self) -> &[NodeType] {
        &self.phi
    }

    pub fn node_type(&self, v: usize) -> NodeType {
        self.phi[v]
    }

    pub fn node_kg_ids(&self) -> &[usize] {
        &self.node_kg_ids
    }

    /// `(source, target)` pairs of relation `r` (1-based).
    pub fn edges(&self, r: usize) -> &[(usize, usize)] {
        &self.edges_by_rel[r - 1]
    }

    /// Outgoing `(relation, target)` pairs of `v`, sorted.
    pub fn out_edges(&self, v: usize) -> &[(usize, usize)] {
        &self.out_adj[v]
    }

    pub fn num_edges(&self) -> usize {
        self.edges_by_rel.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, j: usize, r: usize, i: usize) -> bool {
        r >= 1 && r <= self.m && self.edges_by_rel[r - 1].binary_search(&(j, i)).is_ok()
    }

    /// All edges as `(source, relation, target)`, ordered by relation then pair.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges_by_rel
            .iter()
            .enumerate()
            .flat_map(|(ri, list)| list.iter().map(move |&(j, i)| (j, ri + 1, i)))
    }

    pub fn nodes_of(&self, t: NodeType) -> Vec<usize> {
        (0..self.n()).filter(|&v| self.phi[v] == t).collect()
    }

    pub fn node_set(&self, t: NodeType) -> BTreeSet<usize> {
        self.nodes_of(t).into_iter().collect()
    }

    pub fn count_by_type(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for t in &self.phi {
            c[t.index()] += 1;
        }
        c
    }

    pub fn to_json_value(&self) -> GraphJson {
        GraphJson {
            n: self.n(),
            phi: self.phi.iter().map(|t| t.tag().to_string()).collect(),
            kg_ids: self.node_kg_ids.clone(),
            edges: self.triples().map(|(j, r, i)| [j, r, i]).collect(),
            m: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_json_value())?)
    }

    /// Parses graph JSON. The relation count comes from `m` when given, then
    /// from an optional `"m"` field, and falls back to the largest relation id.
    pub fn from_json(text: &str, m: Option<usize>) -> Result<Self> {
        let g: GraphJson = serde_json::from_str(text)?;
        g.into_graph(m)
    }

    pub fn load(path: impl AsRef<Path>, m: Option<usize>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Wire form: `{"n":..,"phi":["q"|"a"|"o",..],"kg_ids":[..],"edges":[[j,r,i],..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub phi: Vec<String>,
    #[serde(default)]
    pub kg_ids: Vec<usize>,
    pub edges: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl GraphJson {
    pub fn into_graph(self, m: Option<usize>) -> Result<MultiRelGraph> {
        if self.phi.len() != self.n {
            return Err(Error::DimMismatch(format!("{} phi tags for n = {}", self.phi.len(), self.n)));
        }
        let phi = self.phi.iter().map(|t| NodeType::from_tag(t)).collect::<Result<Vec<_>>>()?;
        let kg_ids = if self.kg_ids.is_empty() { None } else { Some(self.kg_ids) };
        let max_rel = self.edges.iter().map(|e| e[1]).max().unwrap_or(0);
        let m = m.or(self.m).unwrap_or(max_rel);
        MultiRelGraph::new(phi, kg_ids, m, self.edges.into_iter().map(|[j, r, i]| (j, r, i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeType::*;

    #[test]
    fn dedups_and_sorts() {
        let g = MultiRelGraph::new(
            vec![Question, Other, Answer],
            None,
            2,
            [(1, 1, 2), (0, 1, 1), (0, 1, 1), (2, 2, 1)],
        )
        .unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.edges(1), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(2, 2, 1));
        assert!(!g.has_edge(1, 2, 2));
        assert_eq!(g.out_edges(0), &[(1, 1)]);
    }

    #[test]
    fn rejects_padding_relation_and_bad_endpoints() {
        assert!(matches!(
            MultiRelGraph::new(vec![Other; 2], None, 2, [(0, 0, 1)]),
            Err(Error::BadRelationId { .. })
        ));
        assert!(MultiRelGraph::new(vec![Other; 2], None, 2, [(0, 1, 2)]).is_err());
    }

    #[test]
    fn json_schema() {
        let g = MultiRelGraph::new(vec![Question, Answer], Some(vec![7, 9]), 2, [(0, 1, 1), (1, 2, 0)])
            .unwrap();
        let text = g.to_json().unwrap();
        assert_eq!(text, r#"{"n":2,"phi":["q","a"],"kg_ids":[7,9],"edges":[[0,1,1],[1,2,0]]}"#);
        let back = MultiRelGraph::from_json(&text, Some(2)).unwrap();
        assert_eq!(back, g);
    }
}
