//! Multi-relational graphs, the KG triple store and subgraph extraction.

mod graph;
mod kg;
mod vocab;

pub use graph::{GraphJson, MultiRelGraph, NodeType};
pub use kg::{extract_subgraph, load_kg, parse_kg, KgStore};
pub use vocab::RelationVocab;
