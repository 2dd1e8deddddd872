//! Mashup-to-mashup similarity over a typed network of mashups, services,
//! topics, tags and providers, and the neighbour-weighted representation of
//! a target mashup.

mod index;
mod lda;

pub use index::{
    dice, find_neighbors, overall_sim, target_embedding, HinIndex, MashupProfile, MashupRepresentation,
    MetaPath, N_PATHS, WEIGHTS,
};
pub use lda::{fit_lda, top_topics, LdaConfig, TopicModel, N_TOP_TOPICS};
