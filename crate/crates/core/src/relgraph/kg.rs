use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use super::{MultiRelGraph, NodeType, RelationVocab};
use crate::error::{Error, Result};

/// Deduplicated, reverse-closed triple store.
#[derive(Clone, Debug, Default)]
pub struct KgStore {
    m: usize,
    names: Vec<String>,
    ids: HashMap<String, usize>,
    triples: Vec<(usize, usize, usize)>,
    seen: HashSet<(usize, usize, usize)>,
    /// head -> [(relation, tail)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl KgStore {
    pub fn new(m: usize) -> Self {
        Self { m, ..Self::default() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_entities(&self) -> usize {
        self.names.len()
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn entity_name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Exact match on the lowercased, trimmed name.
    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.ids.get(&name.trim().to_lowercase()).copied()
    }

    pub fn neighbors(&self, head: usize) -> &[(usize, usize)] {
        &self.adjacency[head]
    }

    pub fn contains(&self, h: usize, r: usize, t: usize) -> bool {
        self.seen.contains(&(h, r, t))
    }

    /// Links mention strings to entity ids.
    pub fn link<S: AsRef<str>>(&self, mentions: &[S]) -> Result<BTreeSet<usize>> {
        mentions
            .iter()
            .map(|s| {
                let s = s.as_ref();
                self.entity_id(s).ok_or_else(|| Error::UnknownEntity(s.to_string()))
            })
            .collect()
    }

    fn intern(&mut self, name: &str) -> usize {
        let key = name.trim().to_lowercase();
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(key.clone(), id);
        self.names.push(key);
        self.adjacency.push(Vec::new());
        id
    }

    fn insert(&mut self, h: usize, r: usize, t: usize) {
        if self.seen.insert((h, r, t)) {
            self.triples.push((h, r, t));
            self.adjacency[h].push((r, t));
        }
    }

    /// Adds `(h, r, t)` together with `(t, rev(r), h)`. Self loops are dropped.
    pub fn add_triple(&mut self, head: &str, r: usize, tail: &str, vocab: &RelationVocab) {
        let h = self.intern(head);
        let t = self.intern(tail);
        if h == t {
            return;
        }
        self.insert(h, r, t);
        self.insert(t, vocab.reverse(r), h);
    }
}

/// Parses `head<TAB>relation<TAB>tail` lines. Relations are merged first, then
/// reversed. Blank lines are skipped.
pub fn parse_kg(text: &str, vocab: &RelationVocab) -> Result<KgStore> {
    let mut kg = KgStore::new(vocab.m());
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected head<TAB>relation<TAB>tail, got {} fields", fields.len()),
            });
        }
        let r = vocab.merge_relation(fields[1])?;
        kg.add_triple(fields[0], r, fields[2], vocab);
    }
    Ok(kg)
}

pub fn load_kg(path: impl AsRef<Path>, vocab: &RelationVocab) -> Result<KgStore> {
    parse_kg(&std::fs::read_to_string(path)?, vocab)
}

/// Builds the contextualized subgraph: the mentions plus every entity on a
/// two-hop path between two distinct mentions, with every KG edge among them.
///
/// Entities in both mention sets are tagged as answers. Nodes are ordered
/// question mentions, answer mentions, then bridges, each by KG id.
pub fn extract_subgraph(
    kg: &KgStore,
    q_entities: &BTreeSet<usize>,
    a_entities: &BTreeSet<usize>,
) -> Result<MultiRelGraph> {
    if q_entities.is_empty() && a_entities.is_empty() {
        return Err(Error::EmptyMentionSet);
    }
    for &e in q_entities.iter().chain(a_entities) {
        if e >= kg.num_entities() {
            return Err(Error::InvalidArgument(format!("entity id {e} not in the KG")));
        }
    }
    let questions: BTreeSet<usize> = q_entities.difference(a_entities).copied().collect();
    let mentions: BTreeSet<usize> = q_entities.union(a_entities).copied().collect();

    let mut bridges = BTreeSet::new();
    for &u in &mentions {
        for &(_, x) in kg.neighbors(u) {
            if mentions.contains(&x) {
                continue;
            }
            let reaches_other = kg.neighbors(x).iter().any(|&(_, w)| w != u && mentions.contains(&w));
            if reaches_other {
                bridges.insert(x);
            }
        }
    }

    let order: Vec<(usize, NodeType)> = questions
        .iter()
        .map(|&e| (e, NodeType::Question))
        .chain(a_entities.iter().map(|&e| (e, NodeType::Answer)))
        .chain(bridges.iter().map(|&e| (e, NodeType::Other)))
        .collect();
    let local: HashMap<usize, usize> = order.iter().enumerate().map(|(i, (e, _))| (*e, i)).collect();

    let mut edges = Vec::new();
    for &(e, _) in &order {
        for &(r, t) in kg.neighbors(e) {
            if let Some(&ti) = local.get(&t) {
                edges.push((local[&e], r, ti));
            }
        }
    }
    MultiRelGraph::new(
        order.iter().map(|(_, t)| *t).collect(),
        Some(order.iter().map(|(e, _)| *e).collect()),
        kg.m(),
        edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> RelationVocab {
        RelationVocab::conceptnet()
    }

    #[test]
    fn single_line_gets_reverse() {
        let kg = parse_kg("child\tatlocation\tclassroom\n", &vocab()).unwrap();
        assert_eq!(kg.num_entities(), 2);
        assert_eq!(kg.triples().len(), 2);
        let r = vocab().id("AtLocation").unwrap();
        assert!(kg.contains(0, r, 1));
        assert!(kg.contains(1, vocab().reverse(r), 0));
    }

    #[test]
    fn empty_and_duplicate_files() {
        let kg = parse_kg("", &vocab()).unwrap();
        assert_eq!((kg.num_entities(), kg.triples().len()), (0, 0));
        let kg = parse_kg("a\tisa\tb\na\tisa\tb\n", &vocab()).unwrap();
        assert_eq!(kg.triples().len(), 2);
    }

    #[test]
    fn self_loops_dropped() {
        let kg = parse_kg("a\tisa\ta\n", &vocab()).unwrap();
        assert_eq!(kg.triples().len(), 0);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_kg("a\tisa\tb\nbroken line\n", &vocab()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_kg("a\tnotarelation\tb\n", &vocab()).unwrap_err();
        assert!(matches!(err, Error::UnknownRelation(_)));
    }

    #[test]
    fn merged_reverse_relation_is_stored_forward() {
        let v = vocab();
        let kg = parse_kg("car\thasa\twheel\n", &v).unwrap();
        let part = v.id("PartOf").unwrap();
        let (car, wheel) = (kg.entity_id("car").unwrap(), kg.entity_id("wheel").unwrap());
        assert!(kg.contains(wheel, part, car));
        assert!(kg.contains(car, v.reverse(part), wheel));
    }

    #[test]
    fn chain_bridge_is_extracted() {
        let kg = parse_kg("a\tisa\tb\nb\tpartof\tc\n", &vocab()).unwrap();
        let g = extract_subgraph(&kg, &kg.link(&["a"]).unwrap(), &kg.link(&["c"]).unwrap()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.num_edges(), 4);
        assert_eq!(g.phi(), &[NodeType::Question, NodeType::Answer, NodeType::Other]);
    }

    #[test]
    fn direct_and_disconnected() {
        let kg = parse_kg("a\tisa\tb\nd\tisa\te\n", &vocab()).unwrap();
        let g = extract_subgraph(&kg, &kg.link(&["a"]).unwrap(), &kg.link(&["b"]).unwrap()).unwrap();
        assert_eq!((g.n(), g.num_edges()), (2, 2));
        let g = extract_subgraph(&kg, &kg.link(&["a"]).unwrap(), &kg.link(&["d"]).unwrap()).unwrap();
        assert_eq!((g.n(), g.num_edges()), (2, 0));
    }

    #[test]
    fn overlap_is_tagged_answer_and_empty_rejected() {
        let kg = parse_kg("a\tisa\tb\n", &vocab()).unwrap();
        let both = kg.link(&["a"]).unwrap();
        let g = extract_subgraph(&kg, &both, &both).unwrap();
        assert_eq!(g.phi(), &[NodeType::Answer]);
        assert!(matches!(
            extract_subgraph(&kg, &BTreeSet::new(), &BTreeSet::new()),
            Err(Error::EmptyMentionSet)
        ));
        assert!(matches!(kg.link(&["zzz"]), Err(Error::UnknownEntity(_))));
    }
}
