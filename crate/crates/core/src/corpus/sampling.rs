use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{FoldSplit, Repository};
use crate::{seed, Error, Result};

/// A training or test triple: target mashup, already-selected services and a
/// candidate, labelled positive when the candidate is one of the mashup's
/// remaining components.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub mashup: usize,
    pub selected: Vec<usize>,
    pub candidate: usize,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Negatives drawn per positive.
    pub neg_ratio: usize,
    /// Sizes of the selected-service subset; 0 produces cold-start samples.
    pub ss_sizes: Vec<usize>,
    /// Maximum number of distinct subsets per (mashup, size).
    pub subset_cap: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            neg_ratio: 12,
            ss_sizes: vec![1, 2, 3],
            subset_cap: 5,
        }
    }
}

/// All size-`r` subsets of `items` in lexicographic order.
pub(crate) fn combinations(items: &[usize], r: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < r - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, r, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, r, 0, &mut Vec::with_capacity(r), &mut out);
    out
}

/// Builds labelled samples for the train or test mashups of `fold`.
///
/// For every mashup and admissible subset size, up to `subset_cap` subsets
/// CS of its components are drawn; every remaining component is a positive,
/// and each positive is paired with `neg_ratio` negatives drawn without
/// replacement from services the mashup does not use. Duplicate triples are
/// removed. Output is a pure function of the inputs and `seed`.
pub fn generate_samples(
    repo: &Repository,
    fold: &FoldSplit,
    purpose: Purpose,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Vec<Sample>> {
    if let Some(bad) = cfg.ss_sizes.iter().find(|&&s| s > 3) {
        return Err(Error::invalid(format!("selected-set size {bad} outside 0..=3")));
    }
    let mut sizes = cfg.ss_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mashups = match purpose {
        Purpose::Train => &fold.train,
        Purpose::Test => &fold.test,
    };

    let mut out = Vec::new();
    let mut seen: HashSet<(usize, Vec<usize>, usize)> = HashSet::new();
    let mut warned = false;
    for &m in mashups {
        let mashup = repo.mashup(m);
        let mut comps = mashup.components.clone();
        comps.sort_unstable();
        let negatives: Vec<usize> = (0..repo.n_services())
            .filter(|s| comps.binary_search(s).is_err())
            .collect();
        let mut rng = seed::rng(seed::derive(seed, &mashup.id));
        for &r in &sizes {
            if r + 1 > comps.len() {
                continue;
            }
            let all = combinations(&comps, r);
            let chosen: Vec<&Vec<usize>> = if all.len() <= cfg.subset_cap {
                all.iter().collect()
            } else {
                let mut picks = index::sample(&mut rng, all.len(), cfg.subset_cap).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| &all[i]).collect()
            };
            for cs in chosen {
                for &pos in comps.iter().filter(|c| !cs.contains(c)) {
                    if seen.insert((m, cs.clone(), pos)) {
                        out.push(Sample {
                            mashup: m,
                            selected: cs.clone(),
                            candidate: pos,
                            label: true,
                        });
                    }
                    let n_neg = if cfg.neg_ratio > negatives.len() {
                        if !warned {
                            warn!(
                                "negative ratio {} exceeds {} available negatives; using all",
                                cfg.neg_ratio,
                                negatives.len()
                            );
                            warned = true;
                        }
                        negatives.len()
                    } else {
                        cfg.neg_ratio
                    };
                    let mut picks = index::sample(&mut rng, negatives.len(), n_neg).into_vec();
                    picks.sort_unstable();
                    for i in picks {
                        let neg = negatives[i];
                        if seen.insert((m, cs.clone(), neg)) {
                            out.push(Sample {
                                mashup: m,
                                selected: cs.clone(),
                                candidate: neg,
                                label: false,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Debug dump: `mashup_id, [selected...], candidate_id, label` per line.
pub fn write_samples(repo: &Repository, samples: &[Sample], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let selected: Vec<&str> = s.selected.iter().map(|&i| repo.service(i).id.as_str()).collect();
        writeln!(
            w,
            "{}, [{}], {}, {}",
            repo.mashup(s.mashup).id,
            selected.join(" "),
            repo.service(s.candidate).id,
            u8::from(s.label)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{mashup, service};
    use crate::corpus::{make_folds, synth_corpus, SynthConfig};

    fn two_component_repo(extra_services: usize) -> Repository {
        let mut services = vec![service("a", "alpha api", &[], "p"), service("b", "beta api", &[], "p")];
        for i in 0..extra_services {
            services.push(service(&format!("x{i:02}"), "other api", &[], "q"));
        }
        Repository::new(services, vec![mashup("m", "target app", &[], &[0, 1])]).unwrap()
    }

    #[test]
    fn combinations_enumerate_in_order() {
        assert_eq!(combinations(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }

    #[test]
    fn positives_enumerate_complements() {
        let repo = two_component_repo(20);
        let cfg = SamplingConfig { neg_ratio: 0, ss_sizes: vec![1], subset_cap: 5 };
        let s = generate_samples(&repo, &FoldSplit::full(&repo), Purpose::Train, &cfg, 1).unwrap();
        let pos: Vec<(Vec<usize>, usize)> = s
            .iter()
            .filter(|x| x.label)
            .map(|x| (x.selected.clone(), x.candidate))
            .collect();
        assert_eq!(pos, vec![(vec![0], 1), (vec![1], 0)]);
    }

    #[test]
    fn twelve_negatives_per_positive_outside_mashup() {
        let repo = two_component_repo(20);
        let cfg = SamplingConfig { neg_ratio: 12, ss_sizes: vec![1], subset_cap: 5 };
        let s = generate_samples(&repo, &FoldSplit::full(&repo), Purpose::Train, &cfg, 1).unwrap();
        for cs in [vec![0usize], vec![1]] {
            let negs: Vec<_> = s.iter().filter(|x| !x.label && x.selected == cs).collect();
            assert_eq!(negs.len(), 12);
            assert!(negs.iter().all(|x| x.candidate >= 2));
        }
    }

    #[test]
    fn negative_ratio_falls_back_to_all() {
        let repo = two_component_repo(3);
        let cfg = SamplingConfig { neg_ratio: 12, ss_sizes: vec![1], subset_cap: 5 };
        let s = generate_samples(&repo, &FoldSplit::full(&repo), Purpose::Train, &cfg, 1).unwrap();
        assert_eq!(s.iter().filter(|x| !x.label).count(), 6);
    }

    #[test]
    fn size_zero_gives_cold_start_samples() {
        let repo = two_component_repo(5);
        let cfg = SamplingConfig { neg_ratio: 1, ss_sizes: vec![0], subset_cap: 5 };
        let s = generate_samples(&repo, &FoldSplit::full(&repo), Purpose::Train, &cfg, 1).unwrap();
        assert!(s.iter().all(|x| x.selected.is_empty()));
        assert_eq!(s.iter().filter(|x| x.label).count(), 2);
    }

    #[test]
    fn labels_follow_membership_and_folds_do_not_leak() {
        let repo = synth_corpus(&SynthConfig {
            n_mashups: 60,
            n_services: 30,
            vocab_size: 120,
            n_tags: 12,
            n_providers: 5,
            seed: 4,
        })
        .unwrap()
        .repository;
        let folds = make_folds(&repo, 5, 2).unwrap();
        let cfg = SamplingConfig { ss_sizes: vec![0, 1, 2, 3], ..Default::default() };
        for fold in &folds {
            let a = generate_samples(&repo, fold, Purpose::Train, &cfg, 11).unwrap();
            assert_eq!(a, generate_samples(&repo, fold, Purpose::Train, &cfg, 11).unwrap());
            let mut uniq = HashSet::new();
            for s in &a {
                assert!(fold.train.contains(&s.mashup));
                let comps = &repo.mashup(s.mashup).components;
                assert!(s.selected.iter().all(|c| comps.contains(c)));
                assert!(s.selected.len() < comps.len());
                assert!(!s.selected.contains(&s.candidate));
                assert_eq!(s.label, comps.contains(&s.candidate));
                assert!(uniq.insert((s.mashup, s.selected.clone(), s.candidate)));
            }
        }
    }
}
