use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const METRIC_NAMES: [&str; 5] = ["P", "R", "F1", "MAP", "NDCG"];

/// Per-list values of the five top-N metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    pub ndcg: f64,
}

impl Metrics {
    pub fn to_array(self) -> [f64; 5] {
        [self.precision, self.recall, self.f1, self.map, self.ndcg]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { precision: a[0], recall: a[1], f1: a[2], map: a[3], ndcg: a[4] }
    }

    /// Element-wise mean; `None` for an empty set.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Metrics>) -> Option<Metrics> {
        let mut sum = [0.0; 5];
        let mut n = 0usize;
        for m in items {
            for (s, v) in sum.iter_mut().zip(m.to_array()) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| Metrics::from_array(sum.map(|s| s / n as f64)))
    }
}

/// Metrics of the first `n` entries of `rec` against the relevant set `act`.
/// MAP is normalised by `n_m`; NDCG by the DCG of an ideal list with
/// `min(n, |act|)` leading hits. Returns `None` when `act` is empty.
pub fn metrics_at_n(rec: &[usize], act: &BTreeSet<usize>, n: usize, n_m: usize) -> Option<Metrics> {
    if act.is_empty() {
        log::warn!("empty relevant set; record skipped");
        return None;
    }
    let rec = &rec[..rec.len().min(n)];
    let mut hits = 0usize;
    let mut ap = 0.0;
    let mut dcg = 0.0;
    for (i, s) in rec.iter().enumerate() {
        if act.contains(s) {
            hits += 1;
            ap += hits as f64 / (i + 1) as f64;
            dcg += 1.0 / ((i + 2) as f64).log2();
        }
    }
    let ideal: f64 = (0..n.min(act.len())).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    let h = hits as f64;
    Some(Metrics {
        precision: if rec.is_empty() { 0.0 } else { h / rec.len() as f64 },
        recall: h / act.len() as f64,
        f1: 2.0 * h / (rec.len() + act.len()) as f64,
        map: if n_m == 0 { 0.0 } else { ap / n_m as f64 },
        ndcg: if ideal > 0.0 { dcg / ideal } else { 0.0 },
    })
}

/// Expected F1 of a uniformly random list of `min(n, pool)` services drawn
/// from a pool of `pool` containing `act` relevant ones.
pub fn random_f1(pool: usize, act: usize, n: usize) -> f64 {
    if pool == 0 {
        return 0.0;
    }
    let len = n.min(pool) as f64;
    let hits = len * act as f64 / pool as f64;
    2.0 * hits / (len + act as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// Recomputes every metric from the hit indicator sequence alone.
    fn oracle(hits: &[bool], n_act: usize, n: usize) -> [f64; 5] {
        let i_seq: Vec<u32> = hits.iter().take(n).map(|&h| u32::from(h)).collect();
        let len = i_seq.len() as f64;
        let total: u32 = i_seq.iter().sum();
        let p = if i_seq.is_empty() { 0.0 } else { f64::from(total) / len };
        let r = f64::from(total) / n_act as f64;
        let f1 = 2.0 * f64::from(total) / (len + n_act as f64);
        let mut map = 0.0;
        for i in 1..=i_seq.len() {
            let n_i: u32 = i_seq[..i].iter().sum();
            map += f64::from(n_i) / i as f64 * f64::from(i_seq[i - 1]);
        }
        map /= n_act as f64;
        let dcg = |seq: &[u32]| -> f64 {
            seq.iter().enumerate().map(|(k, &b)| (2f64.powi(b as i32) - 1.0) / (1.0 + (k + 1) as f64).log2()).sum()
        };
        let mut ideal_seq = vec![1u32; n.min(n_act)];
        ideal_seq.resize(n, 0);
        let ndcg = dcg(&i_seq) / dcg(&ideal_seq);
        [p, r, f1, map, ndcg]
    }

    #[test]
    fn worked_example() {
        // rec = (x, b, y, d), act = {b, d}
        let act: BTreeSet<usize> = [1, 3].into();
        let m = metrics_at_n(&[10, 1, 11, 3], &act, 4, 2).unwrap();
        let expect = [0.5, 1.0, 0.667, 0.5, 0.651];
        for (got, want) in m.to_array().iter().zip(expect) {
            assert!((got - want).abs() < 1e-3, "{m:?}");
        }
        let ndcg = (1.0 / 3f64.log2() + 1.0 / 5f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((m.ndcg - ndcg).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_disjoint_lists() {
        let act: BTreeSet<usize> = (0..10).collect();
        let rec: Vec<usize> = (0..10).rev().collect();
        assert_eq!(metrics_at_n(&rec, &act, 10, 10).unwrap().to_array(), [1.0; 5]);
        let miss: Vec<usize> = (20..30).collect();
        assert_eq!(metrics_at_n(&miss, &act, 10, 10).unwrap().to_array(), [0.0; 5]);
        assert_eq!(metrics_at_n(&rec, &BTreeSet::new(), 10, 0), None);
    }

    #[test]
    fn brute_force_oracle_agrees() {
        let mut rng = seed::rng(2024);
        for case in 0..1000 {
            let n = rng.gen_range(1..=10);
            let universe = rng.gen_range(2..30usize);
            let mut ids: Vec<usize> = (0..universe).collect();
            ids.shuffle(&mut rng);
            let rec_len = rng.gen_range(0..=n.min(universe));
            let rec = ids[..rec_len].to_vec();
            ids.shuffle(&mut rng);
            let n_act = rng.gen_range(1..=universe);
            let act: BTreeSet<usize> = ids[..n_act].iter().copied().collect();
            let hits: Vec<bool> = rec.iter().map(|s| act.contains(s)).collect();
            let got = metrics_at_n(&rec, &act, n, n_act).unwrap().to_array();
            let want = oracle(&hits, n_act, n);
            for k in 0..5 {
                assert!((got[k] - want[k]).abs() < 1e-12, "case {case} {}: {got:?} vs {want:?}", METRIC_NAMES[k]);
            }
        }
    }

    #[test]
    fn random_baseline_matches_enumeration() {
        // pool of 5 with 2 relevant, lists of 2: expected hits 0.8
        assert!((random_f1(5, 2, 2) - 2.0 * 0.8 / 4.0).abs() < 1e-15);
        assert_eq!(random_f1(0, 1, 10), 0.0);
        assert!((random_f1(3, 3, 10) - 1.0).abs() < 1e-15);
    }

    fn list() -> impl Strategy<Value = (Vec<bool>, usize)> {
        (prop::collection::vec(any::<bool>(), 1..=10), 0usize..5).prop_map(|(hits, extra)| {
            let n_act = hits.iter().filter(|&&h| h).count() + extra;
            (hits, n_act.max(1))
        })
    }

    fn eval(hits: &[bool], n_act: usize, filler: usize) -> Metrics {
        let act: BTreeSet<usize> = (0..n_act).collect();
        let mut next_hit = 0;
        let rec: Vec<usize> = hits
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                if h {
                    next_hit += 1;
                    next_hit - 1
                } else {
                    1000 + filler * 100 + i
                }
            })
            .collect();
        metrics_at_n(&rec, &act, 10, n_act).unwrap()
    }

    proptest! {
        #[test]
        fn metrics_are_bounded((hits, n_act) in list()) {
            for v in eval(&hits, n_act, 0).to_array() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn only_hit_positions_matter((hits, n_act) in list(), filler in 1usize..5) {
            let (a, b) = (eval(&hits, n_act, 0), eval(&hits, n_act, filler));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn earlier_hits_never_hurt((mut hits, n_act) in list(), pos in 0usize..10) {
            let pos = pos % hits.len();
            if let Some(j) = (pos + 1..hits.len()).find(|&j| hits[j]) {
                if !hits[pos] {
                    let before = eval(&hits, n_act, 0);
                    hits.swap(pos, j);
                    let after = eval(&hits, n_act, 0);
                    prop_assert!(after.map >= before.map - 1e-15);
                    prop_assert!(after.ndcg >= before.ndcg - 1e-15);
                }
            }
        }

        #[test]
        fn f1_is_the_harmonic_mean((hits, n_act) in list()) {
            let m = eval(&hits, n_act, 0);
            let hm = if m.precision + m.recall > 0.0 { 2.0 * m.precision * m.recall / (m.precision + m.recall) } else { 0.0 };
            prop_assert!((m.f1 - hm).abs() < 1e-12);
        }
    }
}
