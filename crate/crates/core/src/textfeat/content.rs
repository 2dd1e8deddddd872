use std::collections::BTreeSet;

use rand::Rng;

use super::{encode_sequence, EncodedText, InceptionCache, InceptionConfig, TextInception, Vocab};
use crate::corpus::{Mashup, Service};
use crate::neural::{EmbeddingTable, Gradients, ParamSet};
use crate::Result;

/// Encoded content of one mashup or service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityText {
    pub seq: EncodedText,
    /// Distinct tag ids in ascending order.
    pub tags: Vec<usize>,
}

impl EntityText {
    pub fn new<'a>(description: &[String], tags: impl IntoIterator<Item = &'a String>, vocab: &Vocab, seq_len: usize) -> Self {
        let tags: BTreeSet<usize> = tags.into_iter().map(|t| vocab.id(t)).collect();
        Self {
            seq: encode_sequence(description, vocab, seq_len),
            tags: tags.into_iter().collect(),
        }
    }

    pub fn from_service(s: &Service, vocab: &Vocab, seq_len: usize) -> Self {
        Self::new(&s.description, &s.tags, vocab, seq_len)
    }

    pub fn from_mashup(m: &Mashup, vocab: &Vocab, seq_len: usize) -> Self {
        Self::new(&m.description, &m.tags, vocab, seq_len)
    }
}

/// `v = v_seq ⊕ v_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentFeature {
    pub v_seq: Vec<f64>,
    pub v_set: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ContentCache {
    inception: InceptionCache,
    tags: Vec<usize>,
}

/// Shared embedding table plus sequence encoder.
#[derive(Debug, Clone)]
pub struct ContentExtractor {
    pub table: EmbeddingTable,
    pub inception: TextInception,
}

impl ContentExtractor {
    pub fn new(params: &mut ParamSet, name: &str, vocab_size: usize, config: InceptionConfig, rng: &mut impl Rng) -> Result<Self> {
        let table = EmbeddingTable::new(params, &format!("{name}.embed"), vocab_size, config.embed_dim, rng)?;
        let inception = TextInception::new(params, &format!("{name}.inception"), config, rng)?;
        Ok(Self { table, inception })
    }

    pub fn dim(&self) -> usize {
        self.inception.config.out_dim + self.table.dim
    }

    /// Mean of the tag embeddings; the empty set maps to zero.
    pub fn tagset_embed(&self, p: &ParamSet, tags: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.table.dim];
        if tags.is_empty() {
            return out;
        }
        for &t in tags {
            for (o, v) in out.iter_mut().zip(self.table.row(p, t)) {
                *o += v;
            }
        }
        let n = tags.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn forward(&self, p: &ParamSet, text: &EntityText) -> Result<(ContentFeature, ContentCache)> {
        let (v_seq, inception) = self.inception.forward(p, &self.table, &text.seq)?;
        let v_set = self.tagset_embed(p, &text.tags);
        let mut v = v_seq.clone();
        v.extend_from_slice(&v_set);
        Ok((ContentFeature { v_seq, v_set, v }, ContentCache { inception, tags: text.tags.clone() }))
    }

    pub fn backward(&self, p: &ParamSet, cache: &ContentCache, dv: &[f64], g: &mut Gradients) {
        let split = self.inception.config.out_dim;
        self.inception.backward(p, &self.table, &cache.inception, &dv[..split], g);
        if !cache.tags.is_empty() {
            let n = cache.tags.len() as f64;
            let per: Vec<f64> = dv[split..].iter().map(|d| d / n).collect();
            for &t in &cache.tags {
                self.table.accumulate(g, t, &per);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{dot, grad_check, AdamConfig, AdamState};
    use rand::Rng;

    fn small_config() -> InceptionConfig {
        InceptionConfig { seq_len: 7, embed_dim: 3, windows: vec![2, 3], channels: 2, out_dim: 3 }
    }

    fn setup(seed: u64, vocab_size: usize, cfg: InceptionConfig) -> (ParamSet, ContentExtractor) {
        let mut p = ParamSet::new();
        let mut rng = crate::seed::rng(seed);
        let ex = ContentExtractor::new(&mut p, "content", vocab_size, cfg, &mut rng).unwrap();
        (p, ex)
    }

    fn text(ids: &[usize], seq_len: usize, tags: &[usize]) -> EntityText {
        let mut padded = ids.to_vec();
        padded.resize(seq_len, 0);
        EntityText { seq: EncodedText { ids: padded, n_real: ids.len() }, tags: tags.to_vec() }
    }

    #[test]
    fn tagset_cases() {
        let (p, ex) = setup(1, 10, small_config());
        assert_eq!(ex.tagset_embed(&p, &[4]), ex.table.row(&p, 4).to_vec());
        assert_eq!(ex.tagset_embed(&p, &[]), vec![0.0; 3]);
        let vocab = Vocab::build(["a", "b"]);
        let (a, b) = ("a".to_string(), "b".to_string());
        let t1 = EntityText::new(&[], [&a, &b], &vocab, 7);
        let t2 = EntityText::new(&[], [&b, &a, &b], &vocab, 7);
        assert_eq!(t1.tags, t2.tags);
        assert_eq!(ex.tagset_embed(&p, &t1.tags), ex.tagset_embed(&p, &t2.tags));
    }

    #[test]
    fn default_shape_concatenates_to_one_hundred() {
        let (p, ex) = setup(2, 30, InceptionConfig::default());
        let (f, _) = ex.forward(&p, &text(&[5, 6, 7], 50, &[8])).unwrap();
        assert_eq!((f.v_seq.len(), f.v_set.len(), f.v.len()), (50, 50, 100));
        let (again, _) = ex.forward(&p, &text(&[5, 6, 7], 50, &[8])).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn all_padding_gives_constant_vector() {
        let (p, ex) = setup(3, 10, small_config());
        let (a, _) = ex.forward(&p, &text(&[], 7, &[])).unwrap();
        // identical whatever the (absent) content would have been
        let (b, _) = ex.forward(&p, &EntityText { seq: EncodedText { ids: vec![0; 7], n_real: 0 }, tags: vec![] }).unwrap();
        assert_eq!(a.v_seq, b.v_seq);
        let (c, _) = ex.forward(&p, &text(&[2], 7, &[])).unwrap();
        assert_ne!(a.v_seq, c.v_seq);
    }

    #[test]
    fn tokens_beyond_length_do_not_matter() {
        let vocab = Vocab::build(["a", "b", "c", "d"]);
        let (p, ex) = setup(4, vocab.len(), small_config());
        let words = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        let x = EntityText::new(&words("a b c a b c d d"), [], &vocab, 7);
        let y = EntityText::new(&words("a b c a b c d a b"), [], &vocab, 7);
        assert_eq!(ex.forward(&p, &x).unwrap().0.v_seq, ex.forward(&p, &y).unwrap().0.v_seq);
    }

    #[test]
    fn perturbing_a_row_only_moves_entities_using_it() {
        let (mut p, ex) = setup(5, 12, small_config());
        let entities = [text(&[2, 3, 4], 7, &[5]), text(&[6, 7], 7, &[8]), text(&[9, 2], 7, &[])];
        let before: Vec<Vec<f64>> = entities.iter().map(|e| ex.forward(&p, e).unwrap().0.v).collect();
        let row = &mut p.get_mut(ex.table.table)[2 * 3..3 * 3];
        row[1] += 0.5;
        let after: Vec<Vec<f64>> = entities.iter().map(|e| ex.forward(&p, e).unwrap().0.v).collect();
        assert_ne!(before[0], after[0]);
        assert_eq!(before[1], after[1]);
        assert_ne!(before[2], after[2]);
    }

    #[test]
    fn extractor_gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let (mut p, ex) = setup(100 + seed, 9, small_config());
            let mut rng = crate::seed::rng(seed);
            for prm in p.iter_mut().filter(|q| q.name.ends_with(".b")) {
                prm.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2));
            }
            let n_real = rng.gen_range(0..=7);
            let ids: Vec<usize> = (0..n_real).map(|_| rng.gen_range(1..9)).collect();
            let tags: Vec<usize> = {
                let mut t: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(2..9)).collect();
                t.sort_unstable();
                t.dedup();
                t
            };
            let e = text(&ids, 7, &tags);
            let coef: Vec<f64> = (0..ex.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = grad_check(
                &p,
                |p| {
                    let (f, cache) = ex.forward(p, &e).unwrap();
                    let mut g = p.zero_grads();
                    ex.backward(p, &cache, &coef, &mut g);
                    (dot(&f.v, &coef), g)
                },
                1e-5,
                1e-4,
            );
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn padding_row_stays_zero_under_training() {
        let (mut p, ex) = setup(6, 9, small_config());
        let mut adam = AdamState::new(&p, AdamConfig { lr: 1e-2, ..Default::default() });
        let e = text(&[3, 4], 7, &[5]);
        for _ in 0..25 {
            let (f, cache) = ex.forward(&p, &e).unwrap();
            let mut g = p.zero_grads();
            ex.backward(&p, &cache, &f.v, &mut g);
            adam.step(&mut p, &g).unwrap();
        }
        assert!(ex.table.row(&p, 0).iter().all(|v| *v == 0.0));
        assert!(ex.table.row(&p, 3).iter().any(|v| *v != 0.0));
    }
}
