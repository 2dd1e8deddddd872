use std::path::Path;

use anyhow::Context;
use bundlerec::corpus::{normalize_tag, tokenize, Repository};
use bundlerec::recmodel::{rank_candidates, FeatureContext, Recommender, Scored, Scorer, Strategy, Target, Variant};

use crate::store::{self, Slot};

/// A loaded model set with its feature context; immutable once built.
#[derive(Debug)]
pub struct Engine {
    pub ctx: FeatureContext,
    pub rec: Recommender,
    pub variant: Variant,
    pub strategy: Strategy,
    pub checkpoint_hash: String,
    pub top_n: usize,
}

/// One ranked list plus the aggregation weights of its top entry over the
/// selected services, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub items: Vec<Scored>,
    pub attention: Vec<(usize, f64)>,
}

impl Engine {
    pub fn new(ctx: FeatureContext, rec: Recommender, top_n: usize) -> anyhow::Result<Self> {
        let arch = &rec.multi.meta.arch;
        Ok(Self {
            variant: arch.variant,
            strategy: arch.strategy,
            checkpoint_hash: store::recommender_hash(&rec)?,
            ctx,
            rec,
            top_n,
        })
    }

    /// Loads the model set for `slot` and rebuilds its feature context.
    pub fn load(data_dir: &Path, out_dir: &Path, variant: Variant, strategy: Strategy, slot: Slot, top_n: usize) -> anyhow::Result<Self> {
        let dir = store::model_dir(out_dir, variant, strategy);
        let cfg = store::read_config(&dir)?;
        let rec = store::load_recommender(&dir, slot).with_context(|| format!("loading {variant}-{strategy} {}", slot.dir_name()))?;
        let ctx = store::build_context(store::load_repo(data_dir)?, &cfg, slot)?;
        Self::new(ctx, rec, top_n)
    }

    pub fn repo(&self) -> &Repository {
        &self.ctx.repo
    }

    pub fn target(requirements: &str, tags: &[String]) -> Target {
        Target::new(tokenize(requirements), tags.iter().filter_map(|t| normalize_tag(t)).collect())
    }

    /// Top-N services outside `selected` for the requirements.
    pub fn rank(&self, target: &Target, selected: &[usize]) -> bundlerec::Result<Ranking> {
        let scorer = Scorer::new(self.rec.model_for(selected.len()), &self.ctx)?;
        let pool: Vec<usize> = (0..self.ctx.n_services()).filter(|s| !selected.contains(s)).collect();
        let items = rank_candidates(self.repo(), scorer.score(target, selected, &pool)?, self.top_n);
        let attention = match items.first() {
            Some(top) if top.attention.len() == selected.len() => selected.iter().copied().zip(top.attention.iter().copied()).collect(),
            _ => Vec::new(),
        };
        Ok(Ranking { items, attention })
    }
}
