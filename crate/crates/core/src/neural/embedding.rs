use rand::Rng;

use super::{xavier_uniform, Gradients, ParamId, ParamSet};
use crate::Result;

/// Row `i` is the embedding of token id `i`; row 0 is padding, stays zero
/// and never receives gradient.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn new(params: &mut ParamSet, name: &str, vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut data = xavier_uniform(rng, vocab_size, dim, vocab_size * dim);
        data[..dim].iter_mut().for_each(|v| *v = 0.0);
        let table = params.add(name, &[vocab_size, dim], data)?;
        Ok(Self { table, vocab_size, dim })
    }

    pub fn row<'a>(&self, p: &'a ParamSet, id: usize) -> &'a [f64] {
        &p.get(self.table)[id * self.dim..(id + 1) * self.dim]
    }

    /// Adds `grad` into the gradient row of `id`; padding is masked.
    pub fn accumulate(&self, g: &mut Gradients, id: usize, grad: &[f64]) {
        if id == 0 {
            return;
        }
        let rows = g.get_mut(self.table);
        for (r, d) in rows[id * self.dim..(id + 1) * self.dim].iter_mut().zip(grad) {
            *r += d;
        }
    }
}
