//! Invocation-space embeddings: second-order biased random walks over the
//! mashup-service graph, then skip-gram with negative sampling.

mod graph;
mod skipgram;
mod walk;

use serde::{Deserialize, Serialize};

pub use graph::{build_graph, AdjGraph, BipartiteGraph};
pub use skipgram::{skipgram_train, NodeEmbedding};
pub use walk::{biased_walks, transition_probs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving two hops away.
    pub q: f64,
    /// Nodes per walk.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub dim: usize,
    pub learning_rate: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 0.25,
            q: 4.0,
            walk_length: 10,
            walks_per_node: 10,
            window: 5,
            negatives: 5,
            epochs: 5,
            dim: 25,
            learning_rate: 0.025,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(crate::Error::invalid("walk parameters p and q must be positive"));
        }
        if self.walk_length < 2 {
            return Err(crate::Error::invalid("walk length must be at least 2"));
        }
        if self.dim == 0 {
            return Err(crate::Error::invalid("embedding dimension must be positive"));
        }
        Ok(())
    }
}
