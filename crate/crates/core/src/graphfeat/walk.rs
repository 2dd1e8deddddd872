use rand::seq::SliceRandom;
use rand::Rng;

use super::{AdjGraph, WalkConfig};
use crate::seed;

/// Normalized next-step distribution at `cur`, having arrived from `prev`.
///
/// Unnormalized weights are `1/p` back to `prev`, `1` to neighbours of `prev`
/// and `1/q` to everything else; without a previous node the step is uniform.
pub fn transition_probs(graph: &AdjGraph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let nbrs = graph.neighbors(cur);
    let weights: Vec<f64> = nbrs
        .iter()
        .map(|&x| match prev {
            None => 1.0,
            Some(t) if x == t => 1.0 / p,
            Some(t) if graph.has_edge(t, x) => 1.0,
            Some(_) => 1.0 / q,
        })
        .collect();
    let total: f64 = weights.iter().sum();
    nbrs.iter().zip(weights).map(|(&x, w)| (x, w / total)).collect()
}

fn step(graph: &AdjGraph, prev: Option<usize>, cur: usize, cfg: &WalkConfig, rng: &mut impl Rng) -> usize {
    let probs = transition_probs(graph, prev, cur, cfg.p, cfg.q);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(x, pr) in &probs {
        acc += pr;
        if u < acc {
            return x;
        }
    }
    probs.last().expect("step from a node with neighbours").0
}

/// `walks_per_node` walks of `walk_length` nodes from every node with at
/// least one neighbour. Each walk draws from its own seed derived from
/// `(seed, round, start)`, so walks are independent of generation order.
pub fn biased_walks(graph: &AdjGraph, cfg: &WalkConfig, seed: u64) -> Vec<Vec<usize>> {
    let starts: Vec<usize> = (0..graph.n_nodes()).filter(|&n| graph.degree(n) > 0).collect();
    let mut walks = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    for round in 0..cfg.walks_per_node {
        let round_seed = seed::derive_n(seed, round as u64);
        let mut order = starts.clone();
        order.shuffle(&mut seed::rng(round_seed));
        for start in order {
            let mut rng = seed::rng(seed::derive_n(round_seed, start as u64));
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            while walk.len() < cfg.walk_length {
                let cur = *walk.last().unwrap();
                let prev = walk.len().checked_sub(2).map(|i| walk[i]);
                walk.push(step(graph, prev, cur, cfg, &mut rng));
            }
            walks.push(walk);
        }
    }
    walks
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn cfg() -> WalkConfig {
        WalkConfig { walks_per_node: 1, ..WalkConfig::default() }
    }

    #[test]
    fn path_graph_return_bias() {
        // a - b - c, at b having come from a
        let g = AdjGraph::from_edges(3, [(0, 1), (1, 2)]);
        let probs = transition_probs(&g, Some(0), 1, 0.25, 4.0);
        // weights 4 and 0.25 -> 4/4.25 and 0.25/4.25
        assert!((probs[0].1 - 16.0 / 17.0).abs() < 1e-15);
        assert!((probs[1].1 - 1.0 / 17.0).abs() < 1e-15);
        assert!((probs[0].1 - 0.941).abs() < 1e-3);
    }

    #[test]
    fn first_step_is_uniform() {
        let g = AdjGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]);
        let probs = transition_probs(&g, None, 0, 0.25, 4.0);
        assert!(probs.iter().all(|&(_, p)| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn walks_are_deterministic_and_cover_connected_nodes() {
        let g = AdjGraph::from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3)]);
        let c = WalkConfig { walks_per_node: 3, ..cfg() };
        let w = biased_walks(&g, &c, 9);
        assert_eq!(w, biased_walks(&g, &c, 9));
        assert_ne!(w, biased_walks(&g, &c, 10));
        assert_eq!(w.len(), 4 * 3);
        assert!(w.iter().all(|walk| walk.len() == 10));
        for walk in &w {
            for pair in walk.windows(2) {
                assert!(g.has_edge(pair[0], pair[1]));
            }
        }
    }

    #[test]
    fn empirical_transitions_match_law() {
        // triangle 0-1-2 with tails 2-3, 3-4 and 1-5: exercises all three weights
        let g = AdjGraph::from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (1, 5)]);
        let c = WalkConfig { walks_per_node: 4000, walk_length: 10, ..WalkConfig::default() };
        let walks = biased_walks(&g, &c, 3);
        let mut counts: HashMap<(usize, usize), HashMap<usize, usize>> = HashMap::new();
        let mut steps = 0;
        for walk in &walks {
            for t in walk.windows(3) {
                *counts.entry((t[0], t[1])).or_default().entry(t[2]).or_default() += 1;
                steps += 1;
            }
        }
        assert!(steps >= 100_000);
        for ((prev, cur), next) in &counts {
            let total: usize = next.values().sum();
            for (x, pr) in transition_probs(&g, Some(*prev), *cur, 0.25, 4.0) {
                let emp = *next.get(&x).unwrap_or(&0) as f64 / total as f64;
                assert!((emp - pr).abs() < 0.01, "({prev},{cur})->{x}: {emp} vs {pr}");
            }
        }
    }
}
