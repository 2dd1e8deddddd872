use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Topics kept per document.
pub const N_TOP_TOPICS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaConfig {
    pub k: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub fold_in_iterations: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self { k: 20, iterations: 200, alpha: 0.1, beta: 0.01, fold_in_iterations: 50 }
    }
}

/// Collapsed-Gibbs LDA state after fitting. Topic-word counts are kept so
/// that unseen documents can be folded in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub config: LdaConfig,
    pub vocab: BTreeMap<String, usize>,
    /// `k x V`, row-major.
    pub topic_word: Vec<u32>,
    pub topic_total: Vec<u32>,
    /// Per training document, `(n_dk + alpha) / (N_d + K alpha)`.
    pub doc_topics: Vec<Vec<f64>>,
    /// Final topic assignment of every token, per document.
    pub assignments: Vec<Vec<usize>>,
}

fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn distribution(counts: &[u32], n: usize, alpha: f64) -> Vec<f64> {
    let k = counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + alpha) / (n as f64 + k * alpha)).collect()
}

/// Indices of the `n` largest entries, larger first, ties by lower index.
pub fn top_topics(dist: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

pub fn fit_lda(docs: &[Vec<String>], config: &LdaConfig, seed: u64) -> Result<TopicModel> {
    if config.k < N_TOP_TOPICS {
        return Err(Error::invalid(format!("LDA needs at least {N_TOP_TOPICS} topics, got {}", config.k)));
    }
    if docs.iter().all(Vec::is_empty) {
        return Err(Error::invalid("LDA corpus is empty"));
    }
    let mut vocab = BTreeMap::new();
    for token in docs.iter().flatten() {
        let next = vocab.len();
        vocab.entry(token.clone()).or_insert(next);
    }
    let k = config.k;
    let v = vocab.len();
    let words: Vec<Vec<usize>> = docs.iter().map(|d| d.iter().map(|t| vocab[t]).collect()).collect();

    let mut rng = seed::rng(seed::derive(seed, "lda"));
    let mut topic_word = vec![0u32; k * v];
    let mut topic_total = vec![0u32; k];
    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in words.iter().enumerate() {
        let zs: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k)).collect();
        for (&w, &t) in doc.iter().zip(&zs) {
            topic_word[t * v + w] += 1;
            topic_total[t] += 1;
            doc_topic[d][t] += 1;
        }
        z.push(zs);
    }

    let vbeta = v as f64 * config.beta;
    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, doc) in words.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                topic_word[old * v + w] -= 1;
                topic_total[old] -= 1;
                doc_topic[d][old] -= 1;
                for (t, wt) in weights.iter_mut().enumerate() {
                    *wt = (doc_topic[d][t] as f64 + config.alpha) * (topic_word[t * v + w] as f64 + config.beta)
                        / (topic_total[t] as f64 + vbeta);
                }
                let new = sample_index(&weights, &mut rng);
                z[d][i] = new;
                topic_word[new * v + w] += 1;
                topic_total[new] += 1;
                doc_topic[d][new] += 1;
            }
        }
    }
    let doc_topics = doc_topic.iter().zip(&words).map(|(c, doc)| distribution(c, doc.len(), config.alpha)).collect();
    Ok(TopicModel { config: config.clone(), vocab, topic_word, topic_total, doc_topics, assignments: z })
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Topic distribution of an unseen document, sampled with the fitted
    /// topic-word counts held fixed. Unknown tokens are ignored.
    pub fn fold_in(&self, tokens: &[String], seed: u64) -> Vec<f64> {
        let k = self.k();
        let v = self.vocab.len();
        let words: Vec<usize> = tokens.iter().filter_map(|t| self.vocab.get(t).copied()).collect();
        let mut rng = seed::rng(seed::derive(seed, "fold-in"));
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words.iter().map(|_| rng.gen_range(0..k)).collect();
        for &t in &z {
            counts[t] += 1;
        }
        let vbeta = v as f64 * self.config.beta;
        let mut weights = vec![0.0; k];
        for _ in 0..self.config.fold_in_iterations {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                for (t, wt) in weights.iter_mut().enumerate() {
                    *wt = (counts[t] as f64 + self.config.alpha) * (self.topic_word[t * v + w] as f64 + self.config.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                }
                z[i] = sample_index(&weights, &mut rng);
                counts[z[i]] += 1;
            }
        }
        distribution(&counts, words.len(), self.config.alpha)
    }
}
