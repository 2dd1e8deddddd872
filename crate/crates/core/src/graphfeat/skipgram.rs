use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::WalkConfig;
use crate::{seed, Error, Result};

/// Learned node vectors. Nodes never seen in a walk keep their random
/// initialisation and are flagged untrained.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    pub trained: Vec<bool>,
}

impl NodeEmbedding {
    pub fn vector(&self, node: usize) -> &[f64] {
        &self.vectors[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.vectors.len()
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.vectors[a], &self.vectors[b]);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    /// One line per node: `name v1 .. vd`.
    pub fn write_dump(&self, names: &[String], path: &Path) -> Result<()> {
        if names.len() != self.n_nodes() {
            return Err(Error::shape(format!("{} names for {} nodes", names.len(), self.n_nodes())));
        }
        let mut out = Vec::new();
        for (name, v) in names.iter().zip(&self.vectors) {
            write!(out, "{name}").unwrap();
            for x in v {
                write!(out, " {x:?}").unwrap();
            }
            out.push(b'\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: &Path) -> Result<(Vec<String>, Self)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut names = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse { file: path.display().to_string(), line: i + 1, message };
            let mut parts = line.split(' ');
            let name = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| parse_err("empty line".into()))?;
            let v = parts
                .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = vectors.first().map(Vec::len) {
                if v.len() != first {
                    return Err(parse_err(format!("expected {first} values, found {}", v.len())));
                }
            }
            names.push(name.to_string());
            vectors.push(v);
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let trained = vec![true; vectors.len()];
        Ok((names, Self { dim, vectors, trained }))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram with negative sampling over `walks`. Negatives are drawn from
/// the walk unigram distribution raised to 0.75. The learning rate decays
/// linearly to `1e-4 * lr` over all epochs. Returns the embedding and the
/// mean loss per epoch.
pub fn skipgram_train(walks: &[Vec<usize>], n_nodes: usize, cfg: &WalkConfig, seed: u64) -> Result<(NodeEmbedding, Vec<f64>)> {
    cfg.validate()?;
    let dim = cfg.dim;
    let mut init_rng = seed::rng(seed::derive(seed, "init"));
    let bound = 0.5 / dim as f64;
    let mut input: Vec<Vec<f64>> =
        (0..n_nodes).map(|_| (0..dim).map(|_| init_rng.gen_range(-bound..bound)).collect()).collect();
    let mut output = vec![vec![0.0; dim]; n_nodes];

    let mut counts = vec![0usize; n_nodes];
    for &n in walks.iter().flatten() {
        if n >= n_nodes {
            return Err(Error::invalid(format!("walk node {n} out of range for {n_nodes} nodes")));
        }
        counts[n] += 1;
    }
    let trained: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let mut cumulative = Vec::with_capacity(n_nodes);
    let mut acc = 0.0;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        cumulative.push(acc);
    }
    let total_weight = acc;

    let total_positions = (walks.iter().map(Vec::len).sum::<usize>() * cfg.epochs).max(1);
    let mut processed = 0usize;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut rng = seed::rng(seed::derive(seed, "negatives"));
    let mut grad_in = vec![0.0; dim];

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = cfg.learning_rate * (1.0 - processed as f64 / total_positions as f64).max(1e-4);
                processed += 1;
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(walk.len());
                for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    let mut targets = Vec::with_capacity(cfg.negatives + 1);
                    targets.push((context, 1.0));
                    while targets.len() <= cfg.negatives && total_weight > 0.0 {
                        let u = rng.gen::<f64>() * total_weight;
                        let neg = cumulative.partition_point(|&c| c <= u).min(n_nodes - 1);
                        if neg != context {
                            targets.push((neg, 0.0));
                        }
                    }
                    for (t, label) in targets {
                        let score: f64 = input[center].iter().zip(&output[t]).map(|(a, b)| a * b).sum();
                        let s = sigmoid(score);
                        loss_sum -= if label > 0.0 { s.max(1e-12).ln() } else { (1.0 - s).max(1e-12).ln() };
                        let g = (label - s) * lr;
                        for k in 0..dim {
                            grad_in[k] += g * output[t][k];
                            output[t][k] += g * input[center][k];
                        }
                    }
                    for k in 0..dim {
                        input[center][k] += grad_in[k];
                    }
                    pairs += 1;
                }
            }
        }
        losses.push(if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 });
    }
    if input.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("skip-gram embedding".into()));
    }
    Ok((NodeEmbedding { dim, vectors: input, trained }, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphfeat::{biased_walks, AdjGraph};

    fn two_cliques() -> AdjGraph {
        let mut edges = Vec::new();
        for base in [0, 6] {
            for a in 0..6 {
                for b in a + 1..6 {
                    edges.push((base + a, base + b));
                }
            }
        }
        edges.push((5, 6));
        // node 12 is isolated
        AdjGraph::from_edges(13, edges)
    }

    fn train(seed: u64) -> (NodeEmbedding, Vec<f64>) {
        let g = two_cliques();
        let cfg = WalkConfig { walks_per_node: 20, epochs: 5, ..WalkConfig::default() };
        let walks = biased_walks(&g, &cfg, seed);
        skipgram_train(&walks, g.n_nodes(), &cfg, seed).unwrap()
    }

    #[test]
    fn loss_decreases() {
        let (_, losses) = train(1);
        assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
    }

    #[test]
    fn clique_members_are_close() {
        let (emb, _) = train(2);
        let mut within = Vec::new();
        let mut across = Vec::new();
        for a in 0..12 {
            for b in a + 1..12 {
                if (a < 6) == (b < 6) {
                    within.push(emb.cosine(a, b));
                } else {
                    across.push(emb.cosine(a, b));
                }
            }
        }
        across.sort_by(f64::total_cmp);
        let p90 = across[(across.len() * 9) / 10];
        let mean_within = within.iter().sum::<f64>() / within.len() as f64;
        assert!(mean_within > p90, "within {mean_within} vs across p90 {p90}");
    }

    #[test]
    fn isolated_node_keeps_initialisation() {
        let (emb, _) = train(3);
        assert!(!emb.trained[12]);
        let mut rng = seed::rng(seed::derive(3, "init"));
        let bound = 0.5 / emb.dim as f64;
        let init: Vec<Vec<f64>> =
            (0..13).map(|_| (0..emb.dim).map(|_| rng.gen_range(-bound..bound)).collect()).collect();
        assert_eq!(emb.vectors[12], init[12]);
        assert_ne!(emb.vectors[0], init[0]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(train(4).0, train(4).0);
    }

    #[test]
    fn dump_round_trip() {
        let (emb, _) = train(5);
        let names: Vec<String> = (0..13).map(|i| format!("m:{i}")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        emb.write_dump(&names, &path).unwrap();
        let (read_names, back) = NodeEmbedding::read_dump(&path).unwrap();
        assert_eq!(read_names, names);
        assert_eq!(back.vectors, emb.vectors);
        let first = fs::read_to_string(&path).unwrap();
        assert_eq!(first.lines().next().unwrap().split(' ').count(), 26);
    }
}
