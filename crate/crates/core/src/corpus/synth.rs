//! Clustered synthetic corpus.
//!
//! Services belong to latent functional clusters that share vocabulary, tags
//! and providers. Inside a cluster, services form small "kits" that tend to be
//! used together and share a few words of their own, and clusters come in
//! correlated pairs. A mashup draws its
//! components from one kit of a primary cluster and one kit of a (usually
//! paired) secondary cluster, while its requirements text only weakly reveals
//! the clusters. Already-selected services therefore carry information about
//! the next component that the text alone does not.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Mashup, Repository, Service};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_mashups: usize,
    pub n_services: usize,
    pub vocab_size: usize,
    pub n_tags: usize,
    pub n_providers: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_mashups: 200, n_services: 80, vocab_size: 500, n_tags: 30, n_providers: 10, seed: 0 }
    }
}

/// A generated repository together with the latent structure it was drawn from.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub repository: Repository,
    pub service_cluster: Vec<usize>,
    pub service_kit: Vec<usize>,
    pub n_clusters: usize,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "pe", "sa", "do", "fu", "gri", "ha", "ji",
    "bel", "cor", "dan", "eth", "fin", "gal", "mor", "nix", "quo",
];

fn word(i: usize) -> String {
    // base-24 digits of i + 24, so every word has at least two syllables
    let base = SYLLABLES.len();
    let mut n = i + base;
    let mut parts = Vec::new();
    while n > 0 {
        parts.push(SYLLABLES[n % base]);
        n /= base;
    }
    parts.reverse();
    parts.concat()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn slice_for(len: usize, parts: usize, k: usize) -> std::ops::Range<usize> {
    (k * len / parts)..((k + 1) * len / parts)
}

struct Layout {
    n_clusters: usize,
    tags: Vec<String>,
    cluster_tags: Vec<Vec<usize>>,
    cluster_words: Vec<Vec<String>>,
    /// Indexed by global kit number.
    kit_words: Vec<Vec<String>>,
    general_words: Vec<String>,
    cluster_members: Vec<Vec<usize>>,
    kits: Vec<Vec<Vec<usize>>>,
}

impl Layout {
    fn new(cfg: &SynthConfig) -> Self {
        let n_clusters = (cfg.n_services / 10).max(2).min(cfg.n_services);
        let vocab: Vec<String> = (0..cfg.vocab_size).map(word).collect();
        let tags = vocab[..cfg.n_tags].to_vec();
        let rest = &vocab[cfg.n_tags..];
        let (clustered, rest) = rest.split_at(rest.len() * 2 / 5);
        let (kit_pool, general) = rest.split_at(rest.len() * 2 / 5);
        let cluster_words = (0..n_clusters)
            .map(|c| clustered[slice_for(clustered.len(), n_clusters, c)].to_vec())
            .collect();
        let cluster_tags = (0..n_clusters)
            .map(|c| {
                let r = slice_for(cfg.n_tags, n_clusters, c);
                if r.is_empty() {
                    vec![c % cfg.n_tags]
                } else {
                    r.collect()
                }
            })
            .collect();
        let mut cluster_members = vec![Vec::new(); n_clusters];
        for s in 0..cfg.n_services {
            cluster_members[s % n_clusters].push(s);
        }
        let kits = cluster_members
            .iter()
            .map(|members| {
                let mut kits: Vec<Vec<usize>> = members.chunks(3).map(<[usize]>::to_vec).collect();
                if kits.len() > 1 && kits.last().is_some_and(|k| k.len() == 1) {
                    let last = kits.pop().unwrap();
                    kits.last_mut().unwrap().extend(last);
                }
                kits
            })
            .collect::<Vec<Vec<Vec<usize>>>>();
        let n_kits = kits.iter().map(Vec::len).sum();
        let kit_words = (0..n_kits).map(|k| kit_pool[slice_for(kit_pool.len(), n_kits, k)].to_vec()).collect();
        Self {
            n_clusters,
            tags,
            cluster_tags,
            cluster_words,
            kit_words,
            general_words: general.to_vec(),
            cluster_members,
            kits,
        }
    }

    fn partner(&self, c: usize) -> usize {
        let p = c ^ 1;
        if p < self.n_clusters {
            p
        } else {
            0
        }
    }

    fn draw_word(&self, rng: &mut impl Rng, cluster: usize) -> String {
        let words = if self.cluster_words[cluster].is_empty() {
            &self.general_words
        } else {
            &self.cluster_words[cluster]
        };
        words.choose(rng).cloned().unwrap_or_else(|| word(0))
    }

    fn draw_general(&self, rng: &mut impl Rng) -> String {
        self.general_words.choose(rng).cloned().unwrap_or_else(|| word(1))
    }
}

/// Generates a clustered repository. Identical configs give identical output.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if [cfg.n_mashups, cfg.n_services, cfg.vocab_size, cfg.n_tags, cfg.n_providers].contains(&0) {
        return Err(Error::invalid("all synthetic corpus counts must be positive"));
    }
    if cfg.vocab_size < cfg.n_tags {
        return Err(Error::invalid(format!(
            "vocabulary size {} smaller than tag count {}",
            cfg.vocab_size, cfg.n_tags
        )));
    }
    if cfg.n_services < 2 {
        return Err(Error::invalid("at least two services are needed to form mashups"));
    }
    let layout = Layout::new(cfg);
    let mut rng = seed::rng(seed::derive(cfg.seed, "synth"));
    let id_width = cfg.n_services.max(cfg.n_mashups).to_string().len().max(3);

    let mut service_cluster = Vec::with_capacity(cfg.n_services);
    let mut service_kit = vec![0; cfg.n_services];
    for (c, kits) in layout.kits.iter().enumerate() {
        let offset: usize = layout.kits[..c].iter().map(Vec::len).sum();
        for (k, kit) in kits.iter().enumerate() {
            for &s in kit {
                service_kit[s] = offset + k;
            }
        }
    }
    let mut services = Vec::with_capacity(cfg.n_services);
    for s in 0..cfg.n_services {
        let c = s % layout.n_clusters;
        service_cluster.push(c);
        let len = rng.gen_range(8..=14);
        let kit_words = &layout.kit_words[service_kit[s]];
        let description: Vec<String> = (0..len)
            .map(|_| match rng.gen_range(0..100) {
                0..=39 if !kit_words.is_empty() => kit_words.choose(&mut rng).unwrap().clone(),
                0..=74 => layout.draw_word(&mut rng, c),
                _ => layout.draw_general(&mut rng),
            })
            .collect();
        let mut tags = BTreeSet::new();
        for _ in 0..rng.gen_range(2..=3) {
            let t = *layout.cluster_tags[c].choose(&mut rng).unwrap();
            tags.insert(layout.tags[t].clone());
        }
        if rng.gen_bool(0.1) {
            tags.insert(layout.tags.choose(&mut rng).unwrap().clone());
        }
        let provider = if rng.gen_bool(0.8) {
            let own: Vec<usize> = (0..cfg.n_providers)
                .filter(|p| p % layout.n_clusters == c)
                .collect();
            if own.is_empty() {
                c % cfg.n_providers
            } else {
                *own.choose(&mut rng).unwrap()
            }
        } else {
            rng.gen_range(0..cfg.n_providers)
        };
        let name = format!(
            "{} {} API",
            capitalize(&layout.draw_word(&mut rng, c)),
            capitalize(&layout.draw_word(&mut rng, c))
        );
        services.push(Service {
            id: format!("s{s:0id_width$}"),
            name,
            description,
            tags,
            provider: format!("provider{provider:02}"),
        });
    }

    let mut mashups = Vec::with_capacity(cfg.n_mashups);
    for m in 0..cfg.n_mashups {
        let primary = rng.gen_range(0..layout.n_clusters);
        let secondary = if rng.gen_bool(0.75) {
            layout.partner(primary)
        } else {
            rng.gen_range(0..layout.n_clusters)
        };
        let size = match rng.gen_range(0..100) {
            0..=29 => 2,
            30..=61 => 3,
            _ => 4,
        }
        .min(cfg.n_services);
        let first_kit = layout.kits[primary].choose(&mut rng).unwrap();
        let second_kit = layout.kits[secondary].choose(&mut rng).unwrap();
        let from_first = size.div_ceil(2);
        let mut components: Vec<usize> = Vec::with_capacity(size);
        let push = |pool: &[usize], want: usize, rng: &mut crate::seed::Rng, comps: &mut Vec<usize>| {
            let mut pool: Vec<usize> = pool.iter().copied().filter(|s| !comps.contains(s)).collect();
            pool.shuffle(rng);
            for s in pool.into_iter().take(want) {
                let pick = if rng.gen_bool(0.1) { rng.gen_range(0..cfg.n_services) } else { s };
                if !comps.contains(&pick) {
                    comps.push(pick);
                }
            }
        };
        push(first_kit, from_first, &mut rng, &mut components);
        push(second_kit, size - components.len(), &mut rng, &mut components);
        push(&layout.cluster_members[primary], size - components.len(), &mut rng, &mut components);
        while components.len() < size {
            let s = rng.gen_range(0..cfg.n_services);
            if !components.contains(&s) {
                components.push(s);
            }
        }

        let len = rng.gen_range(6..=12);
        let description: Vec<String> = (0..len)
            .map(|_| match rng.gen_range(0..100) {
                0..=34 => layout.draw_word(&mut rng, primary),
                35..=49 => layout.draw_word(&mut rng, secondary),
                _ => layout.draw_general(&mut rng),
            })
            .collect();
        let mut tags = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=2) {
            let t = *layout.cluster_tags[primary].choose(&mut rng).unwrap();
            tags.insert(layout.tags[t].clone());
        }
        if rng.gen_bool(0.5) {
            let t = *layout.cluster_tags[secondary].choose(&mut rng).unwrap();
            tags.insert(layout.tags[t].clone());
        }
        let name = format!(
            "{} {}",
            capitalize(&layout.draw_word(&mut rng, primary)),
            capitalize(&layout.draw_word(&mut rng, secondary))
        );
        mashups.push(Mashup {
            id: format!("m{m:0id_width$}"),
            name,
            description,
            tags,
            components,
        });
    }

    Ok(SynthCorpus {
        repository: Repository::new(services, mashups)?,
        service_cluster,
        service_kit,
        n_clusters: layout.n_clusters,
    })
}
