use std::collections::BTreeMap;

use super::{fit_lda, top_topics, LdaConfig, TopicModel, N_TOP_TOPICS};
use crate::corpus::Repository;
use crate::graphfeat::NodeEmbedding;
use crate::{seed, Error, Result};

pub const N_PATHS: usize = 6;

/// Fixed meta-path weights, in [`MetaPath`] order.
pub const WEIGHTS: [f64; N_PATHS] = [0.14, 0.14, 0.27, 0.15, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaPath {
    /// mashup - topic - mashup
    Topic,
    /// mashup - tag - mashup
    Tag,
    /// mashup - service - mashup
    Service,
    /// mashup - service - topic - service - mashup
    ServiceTopic,
    /// mashup - service - tag - service - mashup
    ServiceTag,
    /// mashup - service - provider - service - mashup
    ServiceProvider,
}

impl MetaPath {
    pub const ALL: [MetaPath; N_PATHS] = [
        MetaPath::Topic,
        MetaPath::Tag,
        MetaPath::Service,
        MetaPath::ServiceTopic,
        MetaPath::ServiceTag,
        MetaPath::ServiceProvider,
    ];

    /// Paths are numbered 1 to 6.
    pub fn from_number(n: usize) -> Result<Self> {
        n.checked_sub(1)
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::invalid(format!("meta-path must be 1..=6, got {n}")))
    }
}

/// Sets a mashup contributes to the six paths. All sets are sorted and
/// distinct.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MashupProfile {
    pub topics: Vec<usize>,
    pub tags: Vec<usize>,
    pub services: Vec<usize>,
    pub service_topics: Vec<usize>,
    pub service_tags: Vec<usize>,
    pub service_providers: Vec<usize>,
}

impl MashupProfile {
    fn set(&self, path: MetaPath) -> &[usize] {
        match path {
            MetaPath::Topic => &self.topics,
            MetaPath::Tag => &self.tags,
            MetaPath::Service => &self.services,
            MetaPath::ServiceTopic => &self.service_topics,
            MetaPath::ServiceTag => &self.service_tags,
            MetaPath::ServiceProvider => &self.service_providers,
        }
    }

    pub fn sim(&self, other: &MashupProfile, path: MetaPath) -> f64 {
        dice(self.set(path), other.set(path))
    }

    pub fn sims(&self, other: &MashupProfile) -> [f64; N_PATHS] {
        MetaPath::ALL.map(|p| self.sim(other, p))
    }
}

/// `2 |A ∩ B| / (|A| + |B|)` over sorted distinct slices; 0 if either is empty.
pub fn dice(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

pub fn overall_sim(sims: &[f64; N_PATHS], weights: &[f64; N_PATHS]) -> f64 {
    sims.iter().zip(weights).map(|(s, w)| s * w).sum()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Typed network built from the training fold: fitted topics for every
/// service and training mashup, tag and provider dictionaries, and one
/// profile per training mashup.
#[derive(Debug, Clone)]
pub struct HinIndex {
    pub topic_model: TopicModel,
    tag_ids: BTreeMap<String, usize>,
    service_topics: Vec<Vec<usize>>,
    service_tags: Vec<Vec<usize>>,
    service_providers: Vec<usize>,
    /// `(mashup index, mashup id, profile)` for every indexed mashup.
    entries: Vec<(usize, String, MashupProfile)>,
    /// Topic sets of indexed mashups, by mashup index.
    mashup_topics: BTreeMap<usize, Vec<usize>>,
    seed: u64,
}

impl HinIndex {
    /// Fits LDA on all service descriptions plus the training mashups'
    /// descriptions and indexes the training mashups with their full
    /// component sets.
    pub fn build(repo: &Repository, train_mashups: &[usize], lda: &LdaConfig, seed: u64) -> Result<Self> {
        let mut docs: Vec<Vec<String>> = repo.services().iter().map(|s| s.description.clone()).collect();
        docs.extend(train_mashups.iter().map(|&m| repo.mashup(m).description.clone()));
        let topic_model = fit_lda(&docs, lda, seed::derive(seed, "hin-lda"))?;
        let top = |d: &[f64]| sorted(top_topics(d, N_TOP_TOPICS));

        let mut tag_ids = BTreeMap::new();
        for tag in repo.services().iter().flat_map(|s| &s.tags).chain(train_mashups.iter().flat_map(|&m| &repo.mashup(m).tags)) {
            let next = tag_ids.len();
            tag_ids.entry(tag.clone()).or_insert(next);
        }
        let mut provider_ids = BTreeMap::new();
        let service_providers = repo
            .services()
            .iter()
            .map(|s| {
                let next = provider_ids.len();
                *provider_ids.entry(s.provider.clone()).or_insert(next)
            })
            .collect();
        let service_topics = (0..repo.n_services()).map(|s| top(&topic_model.doc_topics[s])).collect();
        let service_tags = repo.services().iter().map(|s| sorted(s.tags.iter().map(|t| tag_ids[t]).collect())).collect();

        let mut index = Self {
            topic_model,
            tag_ids,
            service_topics,
            service_tags,
            service_providers,
            entries: Vec::new(),
            mashup_topics: BTreeMap::new(),
            seed,
        };
        for (i, &m) in train_mashups.iter().enumerate() {
            let topics = top(&index.topic_model.doc_topics[repo.n_services() + i]);
            index.mashup_topics.insert(m, topics.clone());
        }
        for &m in train_mashups {
            let mashup = repo.mashup(m);
            let profile = index.profile_with_topics(index.mashup_topics[&m].clone(), mashup.tags.iter(), &mashup.components);
            index.entries.push((m, mashup.id.clone(), profile));
        }
        index.entries.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn profile(&self, mashup: usize) -> Option<&MashupProfile> {
        self.entries.iter().find(|e| e.0 == mashup).map(|e| &e.2)
    }

    /// Top topics of a description: fitted topics for indexed mashups,
    /// fold-in otherwise. Fold-in is seeded from the tokens themselves so the
    /// same text always gets the same topics.
    pub fn topics_for(&self, mashup: Option<usize>, tokens: &[String]) -> Vec<usize> {
        if let Some(t) = mashup.and_then(|m| self.mashup_topics.get(&m)) {
            return t.clone();
        }
        let text_seed = seed::derive(self.seed, &tokens.join(" "));
        sorted(top_topics(&self.topic_model.fold_in(tokens, text_seed), N_TOP_TOPICS))
    }

    /// Profile of a target whose services are `services` (its selected set).
    /// Tags not seen in the index get fresh ids that match nothing.
    pub fn profile_with_topics<'a>(
        &self,
        topics: Vec<usize>,
        tags: impl IntoIterator<Item = &'a String>,
        services: &[usize],
    ) -> MashupProfile {
        let mut fresh = self.tag_ids.len();
        let tags = tags
            .into_iter()
            .map(|t| {
                self.tag_ids.get(t).copied().unwrap_or_else(|| {
                    fresh += 1;
                    fresh - 1
                })
            })
            .collect();
        let services = sorted(services.to_vec());
        MashupProfile {
            topics,
            tags: sorted(tags),
            service_topics: sorted(services.iter().flat_map(|&s| self.service_topics[s].iter().copied()).collect()),
            service_tags: sorted(services.iter().flat_map(|&s| self.service_tags[s].iter().copied()).collect()),
            service_providers: sorted(services.iter().map(|&s| self.service_providers[s]).collect()),
            services,
        }
    }

    pub fn target_profile<'a>(
        &self,
        mashup: Option<usize>,
        tokens: &[String],
        tags: impl IntoIterator<Item = &'a String>,
        selected: &[usize],
    ) -> MashupProfile {
        self.profile_with_topics(self.topics_for(mashup, tokens), tags, selected)
    }
}

/// Top `k` indexed mashups by overall similarity, descending, ties by
/// ascending mashup id. `exclude` removes the target itself.
pub fn find_neighbors(index: &HinIndex, target: &MashupProfile, exclude: Option<usize>, k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, &str, f64)> = index
        .entries
        .iter()
        .filter(|e| Some(e.0) != exclude)
        .map(|(m, id, profile)| (*m, id.as_str(), overall_sim(&target.sims(profile), &WEIGHTS)))
        .collect();
    // entries are already in id order, so a stable sort on score keeps the tie rule
    scored.sort_by(|a, b| b.2.total_cmp(&a.2));
    scored.into_iter().take(k).map(|(m, _, s)| (m, s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MashupRepresentation {
    pub neighbors: Vec<(usize, f64)>,
    pub v_m: Vec<f64>,
    /// No neighbour contributed, so `v_m` is the zero vector.
    pub empty: bool,
}

/// `v_m = Σ sim_i v_{nm_i}`, using mashup node ids as embedding rows.
/// Untrained neighbours are skipped. With `normalize`, weights are divided
/// by their sum.
pub fn target_embedding(neighbors: &[(usize, f64)], embedding: &NodeEmbedding, normalize: bool) -> MashupRepresentation {
    let used: Vec<(usize, f64)> = neighbors.iter().copied().filter(|&(m, _)| embedding.trained[m]).collect();
    let total: f64 = used.iter().map(|u| u.1).sum();
    let mut v_m = vec![0.0; embedding.dim];
    for &(m, s) in &used {
        let w = if normalize && total > 0.0 { s / total } else { s };
        for (o, x) in v_m.iter_mut().zip(embedding.vector(m)) {
            *o += w * x;
        }
    }
    MashupRepresentation { empty: used.is_empty() || total == 0.0, neighbors: used, v_m }
}
