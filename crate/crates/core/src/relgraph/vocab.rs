use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forward relations kept after merging. Seven are merge targets; the other ten
/// are the remaining ConceptNet relations, retained under their own names.
pub const FORWARD_RELATIONS: [&str; 17] = [
    "Antonym",
    "AtLocation",
    "CapableOf",
    "Causes",
    "CreatedBy",
    "IsA",
    "Desires",
    "HasSubevent",
    "PartOf",
    "HasContext",
    "HasProperty",
    "MadeOf",
    "NotCapableOf",
    "NotDesires",
    "ReceivesAction",
    "RelatedTo",
    "UsedFor",
];

/// `(raw name, merge target, stored reversed)`. Forward names not listed here
/// map to themselves.
pub const MERGE_TABLE: [(&str, &str, bool); 21] = [
    ("AtLocation", "AtLocation", false),
    ("LocatedNear", "AtLocation", false),
    ("Causes", "Causes", false),
    ("CausesDesire", "Causes", false),
    ("MotivatedByGoal", "Causes", true),
    ("Antonym", "Antonym", false),
    ("DistinctFrom", "Antonym", false),
    ("HasSubevent", "HasSubevent", false),
    ("HasFirstSubevent", "HasSubevent", false),
    ("HasLastSubevent", "HasSubevent", false),
    ("HasPrerequisite", "HasSubevent", false),
    ("Entails", "HasSubevent", false),
    ("MannerOf", "HasSubevent", false),
    ("IsA", "IsA", false),
    ("InstanceOf", "IsA", false),
    ("DefinedAs", "IsA", false),
    ("PartOf", "PartOf", false),
    ("HasA", "PartOf", true),
    ("RelatedTo", "RelatedTo", false),
    ("SimilarTo", "RelatedTo", false),
    ("Synonym", "RelatedTo", false),
];

/// Relation ids: `1..=f` are the forward relations, `f+1..=2f` their reverses,
/// and 0 is the padding relation that never labels an edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationVocab {
    forward_names: Vec<String>,
    /// lowercase raw name -> (merged forward name, reversed)
    merge_map: BTreeMap<String, (String, bool)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Default for RelationVocab {
    fn default() -> Self {
        Self::conceptnet()
    }
}

impl RelationVocab {
    /// Builds a vocabulary; every forward name maps to itself unless `merges`
    /// says otherwise.
    pub fn new(
        forward_names: Vec<String>,
        merges: impl IntoIterator<Item = (String, String, bool)>,
    ) -> Result<Self> {
        let mut merge_map = BTreeMap::new();
        for name in &forward_names {
            merge_map.insert(name.to_lowercase(), (name.clone(), false));
        }
        for (raw, target, rev) in merges {
            merge_map.insert(raw.to_lowercase(), (target, rev));
        }
        let mut vocab = Self { forward_names, merge_map, index: HashMap::new() };
        vocab.rebuild_index()?;
        Ok(vocab)
    }

    /// The built-in 17 forward / 34 total relation vocabulary.
    pub fn conceptnet() -> Self {
        Self::new(
            FORWARD_RELATIONS.iter().map(|s| s.to_string()).collect(),
            MERGE_TABLE.iter().map(|(r, t, rev)| (r.to_string(), t.to_string(), *rev)),
        )
        .expect("built-in vocabulary is consistent")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut vocab: Self = serde_json::from_str(text)?;
        for name in vocab.forward_names.clone() {
            vocab.merge_map.entry(name.to_lowercase()).or_insert((name, false));
        }
        vocab.rebuild_index()?;
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn rebuild_index(&mut self) -> Result<()> {
        self.index.clear();
        for (i, name) in self.forward_names.iter().enumerate() {
            if self.index.insert(name.to_lowercase(), i + 1).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate relation `{name}`")));
            }
        }
        for (target, _) in self.merge_map.values() {
            if !self.index.contains_key(&target.to_lowercase()) {
                return Err(Error::UnknownRelation(target.clone()));
            }
        }
        Ok(())
    }

    pub fn forward_names(&self) -> &[String] {
        &self.forward_names
    }

    pub fn num_forward(&self) -> usize {
        self.forward_names.len()
    }

    /// Total relation count including reverses.
    pub fn m(&self) -> usize {
        2 * self.forward_names.len()
    }

    pub fn reverse(&self, r: usize) -> usize {
        let f = self.num_forward();
        debug_assert!(r >= 1 && r <= 2 * f);
        if r <= f {
            r + f
        } else {
            r - f
        }
    }

    /// Id of a merged forward relation by (case-insensitive) name.
    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(&name.to_lowercase()).copied()
    }

    /// Maps a raw KG relation name to its merged id. A leading `*` asks for the
    /// reverse of whatever the bare name maps to.
    pub fn merge_relation(&self, raw: &str) -> Result<usize> {
        let raw = raw.trim();
        let (bare, flip) = match raw.strip_prefix('*') {
            Some(rest) => (rest, true),
            None => (raw, false),
        };
        let (target, rev) = self
            .merge_map
            .get(&bare.to_lowercase())
            .ok_or_else(|| Error::UnknownRelation(raw.to_string()))?;
        let id = self.id(target).ok_or_else(|| Error::UnknownRelation(target.clone()))?;
        Ok(if *rev != flip { self.reverse(id) } else { id })
    }

    /// Display name: forward names verbatim, reverses prefixed with `*`.
    pub fn name(&self, r: usize) -> String {
        let f = self.num_forward();
        match r {
            0 => "<pad>".to_string(),
            r if r <= f => self.forward_names[r - 1].clone(),
            r if r <= 2 * f => format!("*{}", self.forward_names[r - f - 1]),
            r => format!("r{r}"),
        }
    }

    pub fn merge_entries(&self) -> impl Iterator<Item = (&str, &str, bool)> {
        self.merge_map.iter().map(|(k, (t, r))| (k.as_str(), t.as_str(), *r))
    }
}
