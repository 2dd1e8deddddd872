use serde::Serialize;

use super::features::{FeatureContext, Target};
use super::net::{NetInput, Triple};
use super::train::TrainedModel;
use crate::corpus::Repository;
use crate::{Error, Result};

/// One scored candidate with the aggregation weights over the selected
/// services (empty when the strategy has none).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub service: usize,
    pub score: f64,
    pub attention: Vec<f64>,
}

/// A model bound to its feature context, with content features of every
/// service precomputed.
#[derive(Debug)]
pub struct Scorer<'a> {
    pub model: &'a TrainedModel,
    ctx: &'a FeatureContext,
    service_content: Vec<Vec<f64>>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a TrainedModel, ctx: &'a FeatureContext) -> Result<Self> {
        let mut service_content = Vec::new();
        if let Some(ex) = &model.net.content {
            for text in &ctx.service_texts {
                service_content.push(ex.forward(&model.params, text)?.0.v);
            }
        }
        Ok(Self { model, ctx, service_content })
    }

    fn check_service(&self, s: usize) -> Result<()> {
        if s >= self.ctx.n_services() {
            return Err(Error::UnknownService(format!("service index {s}")));
        }
        Ok(())
    }

    /// `r̂` for each candidate, in input order.
    pub fn score(&self, target: &Target, selected: &[usize], candidates: &[usize]) -> Result<Vec<Scored>> {
        for &s in selected.iter().chain(candidates) {
            self.check_service(s)?;
        }
        let (net, p) = (&self.model.net, &self.model.params);
        let content_vm = match &net.content {
            Some(ex) => Some(ex.forward(p, &self.ctx.mashup_text(target))?.0.v),
            None => None,
        };
        let graph_vm = net.uses_graph().then(|| self.ctx.mashup_representation(target, selected).v_m);
        candidates
            .iter()
            .map(|&c| {
                let x = NetInput {
                    content: content_vm.as_ref().map(|v_m| Triple {
                        v_m,
                        selected: selected.iter().map(|&s| self.service_content[s].as_slice()).collect(),
                        v_s: &self.service_content[c],
                    }),
                    graph: graph_vm.as_ref().map(|v_m| Triple {
                        v_m,
                        selected: selected.iter().map(|&s| self.ctx.service_vector(s)).collect(),
                        v_s: self.ctx.service_vector(c),
                    }),
                };
                let (score, cache) = net.predict(p, &x)?;
                Ok(Scored { service: c, score, attention: cache.weights() })
            })
            .collect()
    }
}

/// The models serving one fold: an optional cold-start model for the first
/// round and the multi-round model for everything after.
#[derive(Debug, Clone)]
pub struct Recommender {
    pub cold: Option<TrainedModel>,
    pub multi: TrainedModel,
}

impl Recommender {
    pub fn model_for(&self, n_selected: usize) -> &TrainedModel {
        match (&self.cold, n_selected) {
            (Some(cold), 0) => cold,
            _ => &self.multi,
        }
    }

    pub fn scorers<'a>(&'a self, ctx: &'a FeatureContext) -> Result<(Option<Scorer<'a>>, Scorer<'a>)> {
        let cold = self.cold.as_ref().map(|m| Scorer::new(m, ctx)).transpose()?;
        Ok((cold, Scorer::new(&self.multi, ctx)?))
    }
}

/// Sorts by descending score, ties by ascending service id, and keeps `n`.
pub fn rank_candidates(repo: &Repository, mut scored: Vec<Scored>, n: usize) -> Vec<Scored> {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| repo.service(a.service).id.cmp(&repo.service(b.service).id)));
    scored.truncate(n);
    scored
}
