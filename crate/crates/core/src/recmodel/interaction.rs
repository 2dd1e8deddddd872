use rand::Rng;

use super::Strategy;
use crate::neural::{concat, ensure_finite, softmax, softmax_backward, Mlp, MlpCache, ParamSet, Gradients};
use crate::{Error, Result};

/// Slots of the concatenation strategy.
pub const MAX_SELECTED: usize = 3;
pub const ATTENTION_HIDDEN: [usize; 2] = [80, 40];
pub const INTERACTION_HIDDEN: [usize; 2] = [100, 50];
pub const INTEGRATION_HIDDEN: [usize; 3] = [128, 64, 32];

/// Folds the features of the selected services into one vector `v_SS`.
#[derive(Debug, Clone)]
pub struct Aggregator {
    pub strategy: Strategy,
    pub dim: usize,
    attn: Option<Mlp>,
}

#[derive(Debug, Clone)]
pub struct AggCache {
    /// Attention weights, uniform weights for averaging, empty otherwise.
    pub weights: Vec<f64>,
    selected: Vec<Vec<f64>>,
    cand: Vec<f64>,
    scores: Vec<MlpCache>,
}

impl Aggregator {
    /// `hidden` sizes the attention scorer; unused by other strategies.
    pub fn new(params: &mut ParamSet, name: &str, strategy: Strategy, dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let attn = match strategy {
            Strategy::Attention => Some(Mlp::new(params, name, 4 * dim, hidden, Some(1), rng)?),
            _ => None,
        };
        Ok(Self { strategy, dim, attn })
    }

    pub fn out_dim(&self) -> usize {
        match self.strategy {
            Strategy::Concat => MAX_SELECTED * self.dim,
            _ => self.dim,
        }
    }

    fn pair_input(v_i: &[f64], v_s: &[f64]) -> Vec<f64> {
        let mul: Vec<f64> = v_i.iter().zip(v_s).map(|(a, b)| a * b).collect();
        let sub: Vec<f64> = v_i.iter().zip(v_s).map(|(a, b)| a - b).collect();
        concat(&[v_i, v_s, &mul, &sub])
    }

    pub fn forward(&self, p: &ParamSet, selected: &[&[f64]], cand: &[f64]) -> Result<(Vec<f64>, AggCache)> {
        if cand.len() != self.dim || selected.iter().any(|v| v.len() != self.dim) {
            return Err(Error::shape(format!("selected-service features must all have dimension {}", self.dim)));
        }
        for v in selected {
            ensure_finite(v, "selected-service feature")?;
        }
        let mut out = vec![0.0; self.out_dim()];
        let mut cache = AggCache {
            weights: Vec::new(),
            selected: selected.iter().map(|v| v.to_vec()).collect(),
            cand: cand.to_vec(),
            scores: Vec::new(),
        };
        if selected.is_empty() {
            return Ok((out, cache));
        }
        match self.strategy {
            Strategy::None => {}
            Strategy::Concat => {
                for (slot, v) in selected.iter().take(MAX_SELECTED).enumerate() {
                    out[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(v);
                }
            }
            Strategy::Average | Strategy::Attention => {
                let weights = if let Some(mlp) = &self.attn {
                    let mut scores = Vec::with_capacity(selected.len());
                    for v in selected {
                        let (a, c) = mlp.forward(p, &Self::pair_input(v, cand))?;
                        scores.push(a[0]);
                        cache.scores.push(c);
                    }
                    softmax(&scores)?
                } else {
                    vec![1.0 / selected.len() as f64; selected.len()]
                };
                for (w, v) in weights.iter().zip(selected) {
                    for (o, x) in out.iter_mut().zip(v.iter()) {
                        *o += w * x;
                    }
                }
                cache.weights = weights;
            }
        }
        Ok((out, cache))
    }

    /// Returns gradients w.r.t. each selected feature and the candidate.
    pub fn backward(&self, p: &ParamSet, cache: &AggCache, dv: &[f64], g: &mut Gradients) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = self.dim;
        let mut dsel = vec![vec![0.0; d]; cache.selected.len()];
        let mut dcand = vec![0.0; d];
        if cache.selected.is_empty() {
            return (dsel, dcand);
        }
        match self.strategy {
            Strategy::None => {}
            Strategy::Concat => {
                for (slot, ds) in dsel.iter_mut().take(MAX_SELECTED).enumerate() {
                    ds.copy_from_slice(&dv[slot * d..(slot + 1) * d]);
                }
            }
            Strategy::Average | Strategy::Attention => {
                for (ds, w) in dsel.iter_mut().zip(&cache.weights) {
                    for (o, x) in ds.iter_mut().zip(dv) {
                        *o = w * x;
                    }
                }
                if let Some(mlp) = &self.attn {
                    let dw: Vec<f64> = cache.selected.iter().map(|v| v.iter().zip(dv).map(|(a, b)| a * b).sum()).collect();
                    let dscore = softmax_backward(&cache.weights, &dw);
                    for (i, v_i) in cache.selected.iter().enumerate() {
                        let dx = mlp.backward(p, &cache.scores[i], &[dscore[i]], g);
                        let v_s = &cache.cand;
                        for k in 0..d {
                            let (di, ds, dm, dd) = (dx[k], dx[d + k], dx[2 * d + k], dx[3 * d + k]);
                            dsel[i][k] += di + dm * v_s[k] + dd;
                            dcand[k] += ds + dm * v_i[k] - dd;
                        }
                    }
                }
            }
        }
        (dsel, dcand)
    }
}

/// Attention (or another aggregation) followed by the interaction MLP over
/// `v_m ⊕ v_SS ⊕ v_s`.
#[derive(Debug, Clone)]
pub struct InteractionModule {
    pub aggregator: Aggregator,
    pub mlp: Mlp,
    pub mashup_dim: usize,
}

#[derive(Debug, Clone)]
pub struct InteractionCache {
    pub agg: AggCache,
    mlp: MlpCache,
}

/// Gradients w.r.t. the inputs of one interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGrad {
    pub v_m: Vec<f64>,
    pub selected: Vec<Vec<f64>>,
    pub v_s: Vec<f64>,
}

impl InteractionModule {
    /// Parameters are named `{prefix}attn.*` and `{prefix}interact.*`.
    /// `dims` is (mashup, service) feature size; `widths` is (attention,
    /// interaction) hidden sizes.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        strategy: Strategy,
        dims: (usize, usize),
        widths: (&[usize], &[usize]),
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (mashup_dim, service_dim) = dims;
        let aggregator = Aggregator::new(params, &format!("{prefix}attn"), strategy, service_dim, widths.0, rng)?;
        let in_dim = mashup_dim + aggregator.out_dim() + service_dim;
        let mlp = Mlp::new(params, &format!("{prefix}interact"), in_dim, widths.1, None, rng)?;
        Ok(Self { aggregator, mlp, mashup_dim })
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn forward(&self, p: &ParamSet, v_m: &[f64], selected: &[&[f64]], v_s: &[f64]) -> Result<(Vec<f64>, InteractionCache)> {
        if v_m.len() != self.mashup_dim {
            return Err(Error::shape(format!("mashup feature must have dimension {}, got {}", self.mashup_dim, v_m.len())));
        }
        let (v_ss, agg) = self.aggregator.forward(p, selected, v_s)?;
        let (i, mlp) = self.mlp.forward(p, &concat(&[v_m, &v_ss, v_s]))?;
        Ok((i, InteractionCache { agg, mlp }))
    }

    pub fn backward(&self, p: &ParamSet, cache: &InteractionCache, di: &[f64], g: &mut Gradients) -> TripleGrad {
        let dx = self.mlp.backward(p, &cache.mlp, di, g);
        let (m, a) = (self.mashup_dim, self.aggregator.out_dim());
        let (selected, mut v_s) = self.aggregator.backward(p, &cache.agg, &dx[m..m + a], g);
        for (o, x) in v_s.iter_mut().zip(&dx[m + a..]) {
            *o += x;
        }
        TripleGrad { v_m: dx[..m].to_vec(), selected, v_s }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, grad_check_inputs};
    use crate::seed;
    use proptest::{prop_assert, proptest};

    fn vecs(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn attention(seed: u64, d: usize) -> (ParamSet, Aggregator) {
        let mut p = ParamSet::new();
        let agg = Aggregator::new(&mut p, "attn", Strategy::Attention, d, &[5, 4], &mut seed::rng(seed)).unwrap();
        (p, agg)
    }

    #[test]
    fn singleton_weight_is_one() {
        let (p, agg) = attention(1, 4);
        let v = vecs(&mut seed::rng(2), 2, 4);
        let (out, cache) = agg.forward(&p, &[&v[0]], &v[1]).unwrap();
        assert_eq!(cache.weights, vec![1.0]);
        assert_eq!(out, v[0]);
    }

    #[test]
    fn identical_selected_split_evenly() {
        let (p, agg) = attention(3, 4);
        let v = vecs(&mut seed::rng(4), 2, 4);
        let (_, cache) = agg.forward(&p, &[&v[0], &v[0]], &v[1]).unwrap();
        assert_eq!(cache.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn average_and_none_and_concat() {
        let mut p = ParamSet::new();
        let mut rng = seed::rng(5);
        let u = [1.0, 2.0];
        let w = [3.0, -2.0];
        let avg = Aggregator::new(&mut p, "a", Strategy::Average, 2, &[4], &mut rng).unwrap();
        assert_eq!(avg.forward(&p, &[&u, &w], &u).unwrap().0, vec![2.0, 0.0]);
        let none = Aggregator::new(&mut p, "n", Strategy::None, 2, &[4], &mut rng).unwrap();
        assert_eq!(none.forward(&p, &[&u, &w], &u).unwrap().0, vec![0.0, 0.0]);
        let cat = Aggregator::new(&mut p, "c", Strategy::Concat, 2, &[4], &mut rng).unwrap();
        assert_eq!(cat.forward(&p, &[&u, &w], &u).unwrap().0, vec![1.0, 2.0, 3.0, -2.0, 0.0, 0.0]);
        assert_eq!(cat.forward(&p, &[&w, &u], &u).unwrap().0, vec![3.0, -2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(avg.forward(&p, &[&[1.0]], &u).is_err());
    }

    #[test]
    fn empty_selection_is_zero_for_every_strategy() {
        for s in Strategy::ALL {
            let mut p = ParamSet::new();
            let agg = Aggregator::new(&mut p, "x", s, 3, &[4], &mut seed::rng(6)).unwrap();
            let (out, _) = agg.forward(&p, &[], &[1.0, 2.0, 3.0]).unwrap();
            assert_eq!(out.len(), agg.out_dim());
            assert!(out.iter().all(|&x| x == 0.0), "{s:?}");
        }
    }

    /// Scalar objective `c · aggregate(...)` for gradient checks.
    fn objective(agg: &Aggregator, p: &ParamSet, inputs: &[Vec<f64>], c: &[f64]) -> (f64, AggCache) {
        let refs: Vec<&[f64]> = inputs[..inputs.len() - 1].iter().map(Vec::as_slice).collect();
        let (out, cache) = agg.forward(p, &refs, inputs.last().unwrap()).unwrap();
        (out.iter().zip(c).map(|(a, b)| a * b).sum(), cache)
    }

    #[test]
    fn attention_gradients_match_finite_differences() {
        for s in 0..20u64 {
            let d = 3;
            let (p, agg) = attention(s, d);
            let mut rng = seed::rng(seed::derive_n(s, 1));
            let n_sel = 1 + (s as usize % 3);
            let inputs = vecs(&mut rng, n_sel + 1, d);
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = grad_check(
                &p,
                |q| {
                    let (loss, cache) = objective(&agg, q, &inputs, &c);
                    let mut g = q.zero_grads();
                    agg.backward(q, &cache, &c, &mut g);
                    (loss, g)
                },
                1e-5,
                1e-4,
            );
            assert!(report.passed, "seed {s}: {report:?}");
            let flat: Vec<f64> = inputs.concat();
            let report = grad_check_inputs(
                &flat,
                |x| {
                    let split: Vec<Vec<f64>> = x.chunks(d).map(<[f64]>::to_vec).collect();
                    let (loss, cache) = objective(&agg, &p, &split, &c);
                    let mut g = p.zero_grads();
                    let (ds, dc) = agg.backward(&p, &cache, &c, &mut g);
                    (loss, [ds.concat(), dc].concat())
                },
                1e-5,
                1e-4,
            );
            assert!(report.passed, "inputs, seed {s}: {report:?}");
        }
    }

    #[test]
    fn interaction_input_gradients() {
        for s in 0..20u64 {
            let strategy = Strategy::ALL[s as usize % 4];
            let mut p = ParamSet::new();
            let module = InteractionModule::new(&mut p, "", strategy, (2, 3), (&[5, 4], &[6, 3]), &mut seed::rng(s)).unwrap();
            let mut rng = seed::rng(seed::derive_n(s, 9));
            let n_sel = s as usize % 4;
            let x: Vec<f64> = (0..2 + 3 * (n_sel + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..module.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let run = |x: &[f64], p: &ParamSet| {
                let sel: Vec<&[f64]> = x[2..2 + 3 * n_sel].chunks(3).collect();
                let (i, cache) = module.forward(p, &x[..2], &sel, &x[2 + 3 * n_sel..]).unwrap();
                let loss: f64 = i.iter().zip(&c).map(|(a, b)| a * b).sum();
                let mut g = p.zero_grads();
                let grad = module.backward(p, &cache, &c, &mut g);
                (loss, grad, g)
            };
            let report = grad_check_inputs(
                &x,
                |x| {
                    let (loss, grad, _) = run(x, &p);
                    (loss, [grad.v_m, grad.selected.concat(), grad.v_s].concat())
                },
                1e-5,
                1e-4,
            );
            assert!(report.passed, "{strategy:?} seed {s}: {report:?}");
            let report = grad_check(&p, |q| {
                let (loss, _, g) = run(&x, q);
                (loss, g)
            }, 1e-5, 1e-4);
            assert!(report.passed, "{strategy:?} params seed {s}: {report:?}");
        }
    }

    proptest! {
        #[test]
        fn attention_weights_form_a_distribution(seed in 0u64..1000, n in 1usize..=3, perm in 0usize..6) {
            let d = 4;
            let (p, agg) = attention(seed, d);
            let v = vecs(&mut seed::rng(seed ^ 77), n + 1, d);
            let refs: Vec<&[f64]> = v[..n].iter().map(Vec::as_slice).collect();
            let (out, cache) = agg.forward(&p, &refs, &v[n]).unwrap();
            prop_assert!(cache.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((cache.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mut order: Vec<usize> = (0..n).collect();
            for k in 0..perm % (n.max(1)) { order.rotate_left(1 + k % n.max(1)); }
            if perm % 2 == 1 { order.reverse(); }
            let shuffled: Vec<&[f64]> = order.iter().map(|&i| refs[i]).collect();
            let (out2, cache2) = agg.forward(&p, &shuffled, &v[n]).unwrap();
            for (a, b) in out.iter().zip(&out2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (k, &i) in order.iter().enumerate() {
                prop_assert!((cache2.weights[k] - cache.weights[i]).abs() < 1e-12);
            }
        }
    }
}
