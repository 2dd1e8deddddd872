use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Repository;
use crate::{seed, Error, Result};

/// One train/test split of the mashups (indices into the repository).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSplit {
    /// A split that trains on every mashup and holds nothing out.
    pub fn full(repo: &Repository) -> Self {
        Self {
            index: 0,
            train: (0..repo.n_mashups()).collect(),
            test: Vec::new(),
        }
    }
}

/// Seeded k-fold split over mashups. Test sets partition the mashups and fold
/// sizes differ by at most one.
pub fn make_folds(repo: &Repository, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    let n = repo.n_mashups();
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    if n == 0 {
        return Err(Error::invalid("cannot split an empty repository"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} folds requested for {n} mashups")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "folds")));

    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        train.sort_unstable();
        folds.push(FoldSplit { index: f, train, test });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    fn repo(n: usize) -> Repository {
        synth_corpus(&SynthConfig {
            n_mashups: n,
            n_services: 20,
            vocab_size: 80,
            n_tags: 10,
            n_providers: 4,
            seed: 1,
        })
        .unwrap()
        .repository
    }

    #[test]
    fn ten_mashups_five_folds_of_two() {
        let folds = make_folds(&repo(10), 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
    }

    #[test]
    fn folds_partition_and_are_deterministic() {
        let r = repo(23);
        let a = make_folds(&r, 5, 9).unwrap();
        assert_eq!(a, make_folds(&r, 5, 9).unwrap());
        let mut all: Vec<usize> = a.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for f in &a {
            assert!(f.test.iter().all(|t| !f.train.contains(t)));
            assert_eq!(f.test.len() + f.train.len(), 23);
        }
        let sizes: Vec<usize> = a.iter().map(|f| f.test.len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn rejects_bad_k() {
        let r = repo(4);
        assert!(make_folds(&r, 5, 0).is_err());
        assert!(make_folds(&r, 1, 0).is_err());
        assert!(make_folds(&Repository::empty(), 2, 0).is_err());
    }
}
