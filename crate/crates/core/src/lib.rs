//! Multi-round service bundle recommendation.
//!
//! Given a target mashup's textual requirements and the component services a
//! developer has already picked, the models in this crate score every remaining
//! candidate service by learning interactions between the mashup, the selected
//! services and the candidate.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] holds the repository data model, ingestion, synthetic corpus
//!   generation, fold splitting and the training sample protocol.
//! * [`neural`] is a small fixed-op differentiable core (dense/conv layers,
//!   softmax, cross-entropy, Adam, gradient checking, checkpoints).
//! * [`textfeat`] turns descriptions and tags into content vectors.
//! * [`graphfeat`] learns node embeddings over the invocation graph with
//!   biased random walks and skip-gram.
//! * [`hin`] computes meta-path similarities between mashups, finds neighbours
//!   and builds the neighbour-weighted representation of a new mashup.
//! * [`recmodel`] is the interaction architecture (content, invocation and
//!   hybrid variants), its training procedures and ranking.
//! * [`eval`] has the ranking metrics, the two-stage experiment protocol and
//!   the signed-rank test.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod graphfeat;
pub mod hin;
pub mod neural;
pub mod recmodel;
pub mod seed;
pub mod textfeat;

pub use error::{Error, Result};
