use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{FoldSplit, InvocationMatrix, Repository};
use crate::graphfeat::{biased_walks, build_graph, skipgram_train, NodeEmbedding, WalkConfig};
use crate::hin::{find_neighbors, target_embedding, HinIndex, LdaConfig, MashupRepresentation};
use crate::textfeat::{EntityText, InceptionConfig, Vocab};
use crate::{seed, Result};

/// Settings of every per-fold feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub inception: InceptionConfig,
    pub walk: WalkConfig,
    pub lda: LdaConfig,
    pub k_neighbors: usize,
    /// Divide neighbour weights by their sum when forming `v_m`.
    pub normalize_vm: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inception: InceptionConfig::default(),
            walk: WalkConfig::default(),
            lda: LdaConfig::default(),
            k_neighbors: 20,
            normalize_vm: false,
        }
    }
}

/// A mashup being recommended for: a repository mashup or free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub mashup: Option<usize>,
    pub description: Vec<String>,
    pub tags: Vec<String>,
}

impl Target {
    pub fn from_mashup(repo: &Repository, m: usize) -> Self {
        let mashup = repo.mashup(m);
        Self {
            mashup: Some(m),
            description: mashup.description.clone(),
            tags: mashup.tags.iter().cloned().collect(),
        }
    }

    pub fn new(description: Vec<String>, tags: Vec<String>) -> Self {
        Self { mashup: None, description, tags }
    }
}

/// Everything derived from one training fold that models read their inputs
/// from: vocabulary and encoded service texts for the content pathway, the
/// HIN index and node embeddings for the invocation pathway.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub repo: Arc<Repository>,
    pub config: PipelineConfig,
    pub fold: FoldSplit,
    pub vocab: Vocab,
    pub service_texts: Vec<EntityText>,
    /// Encoded text of every repository mashup.
    pub mashup_texts: Vec<EntityText>,
    pub hin: HinIndex,
    pub embedding: NodeEmbedding,
    /// Mean skip-gram loss per epoch.
    pub skipgram_loss: Vec<f64>,
}

impl FeatureContext {
    /// Builds every pipeline from the training mashups of `fold` only.
    pub fn build(repo: Arc<Repository>, fold: &FoldSplit, config: &PipelineConfig, seed: u64) -> Result<Self> {
        let vocab = Vocab::from_repository(&repo, &fold.train);
        let seq_len = config.inception.seq_len;
        let service_texts = repo.services().iter().map(|s| EntityText::from_service(s, &vocab, seq_len)).collect();
        let mashup_texts = repo.mashups().iter().map(|m| EntityText::from_mashup(m, &vocab, seq_len)).collect();
        let hin = HinIndex::build(&repo, &fold.train, &config.lda, seed::derive(seed, "hin"))?;
        let graph = build_graph(&InvocationMatrix::for_mashups(&repo, &fold.train));
        let walk_seed = seed::derive(seed, "node2vec");
        let walks = biased_walks(&graph.graph, &config.walk, walk_seed);
        let (embedding, skipgram_loss) = skipgram_train(&walks, graph.graph.n_nodes(), &config.walk, walk_seed)?;
        Ok(Self {
            repo,
            config: config.clone(),
            fold: fold.clone(),
            vocab,
            service_texts,
            mashup_texts,
            hin,
            embedding,
            skipgram_loss,
        })
    }

    pub fn n_services(&self) -> usize {
        self.repo.n_services()
    }

    pub fn graph_dim(&self) -> usize {
        self.embedding.dim
    }

    pub fn mashup_text(&self, target: &Target) -> EntityText {
        if let Some(m) = target.mashup {
            return self.mashup_texts[m].clone();
        }
        EntityText::new(&target.description, &target.tags, &self.vocab, self.config.inception.seq_len)
    }

    /// Invocation-space vector of a service.
    pub fn service_vector(&self, s: usize) -> &[f64] {
        self.embedding.vector(self.repo.n_mashups() + s)
    }

    /// Neighbour-weighted invocation-space representation of the target
    /// given its selected services.
    pub fn mashup_representation(&self, target: &Target, selected: &[usize]) -> MashupRepresentation {
        let profile = self.hin.target_profile(target.mashup, &target.description, &target.tags, selected);
        let neighbors = find_neighbors(&self.hin, &profile, target.mashup, self.config.k_neighbors);
        target_embedding(&neighbors, &self.embedding, self.config.normalize_vm)
    }
}
