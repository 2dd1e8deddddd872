use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EncodedText;
use crate::neural::{Activation, Conv1d, ConvCache, Dense, DenseCache, EmbeddingTable, Gradients, ParamSet, Seq, SeqGrad};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InceptionConfig {
    /// Padded/truncated sequence length.
    pub seq_len: usize,
    pub embed_dim: usize,
    /// Window width of each parallel branch.
    pub windows: Vec<usize>,
    /// Channels of both convolutions in every branch.
    pub channels: usize,
    pub out_dim: usize,
}

impl Default for InceptionConfig {
    fn default() -> Self {
        Self { seq_len: 50, embed_dim: 50, windows: vec![2, 3, 4], channels: 32, out_dim: 50 }
    }
}

/// Parallel branches of two stacked convolutions, global average pooling per
/// branch, then one PReLU projection of the concatenated pooled features.
#[derive(Debug, Clone)]
pub struct TextInception {
    pub config: InceptionConfig,
    branches: Vec<(Conv1d, Conv1d)>,
    proj: Dense,
}

#[derive(Debug, Clone)]
pub struct InceptionCache {
    ids: Vec<usize>,
    branches: Vec<(ConvCache, ConvCache, Seq)>,
    proj: DenseCache,
}

impl TextInception {
    pub fn new(params: &mut ParamSet, name: &str, config: InceptionConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.windows.iter().any(|&w| w == 0 || 2 * (w - 1) >= config.seq_len) {
            return Err(Error::invalid(format!(
                "windows {:?} too wide for sequence length {}",
                config.windows, config.seq_len
            )));
        }
        let mut branches = Vec::new();
        for &w in &config.windows {
            let c1 = Conv1d::new(params, &format!("{name}.w{w}.conv0"), w, config.embed_dim, config.channels, rng)?;
            let c2 = Conv1d::new(params, &format!("{name}.w{w}.conv1"), w, config.channels, config.channels, rng)?;
            branches.push((c1, c2));
        }
        let pooled = config.channels * config.windows.len();
        let proj = Dense::new(params, &format!("{name}.proj"), pooled, config.out_dim, Activation::PRelu, rng)?;
        Ok(Self { config, branches, proj })
    }

    pub fn forward(&self, p: &ParamSet, table: &EmbeddingTable, text: &EncodedText) -> Result<(Vec<f64>, InceptionCache)> {
        if text.ids.len() != self.config.seq_len {
            return Err(Error::shape(format!(
                "encoded text has length {}, extractor expects {}",
                text.ids.len(),
                self.config.seq_len
            )));
        }
        if table.dim != self.config.embed_dim {
            return Err(Error::shape("embedding width differs from extractor configuration"));
        }
        let live_ids = &text.ids[..text.n_real];
        let mut live = Vec::with_capacity(live_ids.len() * table.dim);
        for &id in live_ids {
            if id >= table.vocab_size {
                return Err(Error::shape(format!("token id {id} outside vocabulary of {}", table.vocab_size)));
            }
            live.extend_from_slice(table.row(p, id));
        }
        let input = Seq {
            dim: table.dim,
            live,
            tail: vec![0.0; table.dim],
            tail_len: self.config.seq_len - text.n_real,
        };
        let mut pooled = Vec::with_capacity(self.proj.in_dim);
        let mut caches = Vec::with_capacity(self.branches.len());
        for (c1, c2) in &self.branches {
            let (h1, k1) = c1.forward(p, &input)?;
            let (h2, k2) = c2.forward(p, &h1)?;
            pooled.extend(h2.mean_pool());
            caches.push((k1, k2, h2));
        }
        let (out, proj) = self.proj.forward(p, &pooled)?;
        Ok((out, InceptionCache { ids: live_ids.to_vec(), branches: caches, proj }))
    }

    /// Backpropagates `dv` into the convolution and projection parameters and
    /// the embedding rows of the real tokens.
    pub fn backward(&self, p: &ParamSet, table: &EmbeddingTable, cache: &InceptionCache, dv: &[f64], g: &mut Gradients) {
        let d_pooled = self.proj.backward(p, &cache.proj, dv, g);
        let ch = self.config.channels;
        for (b, ((c1, c2), (k1, k2, h2))) in self.branches.iter().zip(&cache.branches).enumerate() {
            let d_h2 = h2.mean_pool_backward(&d_pooled[b * ch..(b + 1) * ch]);
            let d_h1 = c2.backward(p, k2, &d_h2, g);
            let SeqGrad { live, .. } = c1.backward(p, k1, &d_h1, g);
            // the tail gradient belongs to the padding row and is dropped
            for (&id, row) in cache.ids.iter().zip(live.chunks(table.dim)) {
                table.accumulate(g, id, row);
            }
        }
    }
}
