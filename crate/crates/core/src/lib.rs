//! Multi-hop graph relation network (MHGRN) encoder for multi-relational graphs.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkit`]: dense matrices, masked softmax, the seeded generator, small MLPs
//!   and the `FMAT`/CSV matrix formats.
//! - [`relgraph`]: relation vocabulary, KG triple store and contextualized
//!   subgraph extraction.
//! - [`attention`]: the factored path score `alpha = beta * gamma`.
//! - [`encoder`]: the forward pass, with K-hop message passing computed by a
//!   dynamic program that is linear in the number of hops.
//! - [`pathreason`]: walk enumeration and counting, the brute-force message
//!   passing oracle, and max-product reasoning path decoding.
//! - [`baselines`]: RGCN, RN and K-hop RN, plus the parameter construction that
//!   makes the encoder reproduce K-hop RN.
//! - [`qa`]: plausibility scoring, cross-entropy and a finite-difference trainer.
//! - [`synth`]: synthetic graph generators used by tests and benchmarks.

pub mod attention;
pub mod baselines;
pub mod encoder;
mod error;
pub mod numkit;
pub mod pathreason;
pub mod qa;
pub mod relgraph;
pub mod synth;

pub use attention::{AttentionParams, ScoreTable};
pub use encoder::{encode, Activation, EncoderConfig, EncoderOutput, ModelDims, ModelParams};
pub use error::{Error, Result};
pub use numkit::{DenseMatrix, Mlp, Rng};
pub use pathreason::ReasoningPath;
pub use relgraph::{KgStore, MultiRelGraph, NodeType, RelationVocab};
