use std::collections::{BTreeMap, HashMap};

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{FeatureContext, Target};
use super::net::{Architecture, Net, NetInput, Triple};
use super::score::Recommender;
use super::{Strategy, Variant};
use crate::corpus::{generate_samples, Purpose, Sample, SamplingConfig};
use crate::neural::{AdamConfig, AdamState, Checkpoint, Gradients, ParamSet, CHECKPOINT_VERSION};
use crate::textfeat::{ContentCache, ContentExtractor};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Upper bound on epochs of separate training and of the frozen hybrid
    /// phase.
    pub epochs: usize,
    /// Epochs without a lower mean training loss before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning-rate multiplier of the hybrid fine-tuning phase.
    pub finetune_lr_factor: f64,
    pub finetune_epochs: usize,
    pub sampling: SamplingConfig,
    /// Train a dedicated model on empty-selection samples for the first
    /// round. When false, size 0 joins the multi-round training set.
    pub separate_cold_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            patience: 2,
            batch_size: 64,
            lr: 3e-4,
            finetune_lr_factor: 0.1,
            finetune_epochs: 3,
            sampling: SamplingConfig::default(),
            separate_cold_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Scores the first round, when nothing is selected.
    Cold,
    /// Scores every later round.
    Multi,
}

/// Everything about a trained model except its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub arch: Architecture,
    pub role: Role,
    pub fold: usize,
    pub seed: u64,
    pub train: TrainConfig,
    /// Mean training loss per epoch, all phases in order.
    pub loss_trace: Vec<f64>,
    /// Leading entries of `loss_trace` from the frozen hybrid phase.
    pub phase_a_epochs: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: Net,
    pub params: ParamSet,
    pub meta: ModelMeta,
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut manifest = serde_json::to_value(&self.meta)?;
        manifest["format_version"] = CHECKPOINT_VERSION.into();
        Ok(Checkpoint { manifest, params: self.params.clone() })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut manifest = ckpt.manifest.clone();
        if let Some(obj) = manifest.as_object_mut() {
            obj.remove("format_version");
        }
        let meta: ModelMeta = serde_json::from_value(manifest)?;
        let mut params = ParamSet::new();
        let net = Net::new(&mut params, &meta.arch, &mut seed::rng(0))?;
        if params.len() != ckpt.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} arrays, architecture needs {}",
                ckpt.params.len(),
                params.len()
            )));
        }
        params.load_from(&ckpt.params, "")?;
        Ok(Self { net, params, meta })
    }
}

/// Mini-batch Adam over `n` examples with a seeded shuffle per epoch and
/// early stopping on the mean training loss. `batch` receives the example
/// indices, accumulates summed gradients and returns the summed loss.
pub fn fit<F>(params: &mut ParamSet, adam: AdamConfig, n: usize, cfg: &TrainConfig, epochs: usize, seed: u64, mut batch: F) -> Result<Vec<f64>>
where
    F: FnMut(&ParamSet, &[usize], &mut Gradients) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::invalid("no training samples"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut state = AdamState::new(params, adam);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let (mut best, mut stale) = (f64::INFINITY, 0);
    for epoch in 0..epochs {
        order.shuffle(&mut seed::rng(seed::derive_n(seed, epoch as u64)));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = params.zero_grads();
            total += batch(params, chunk, &mut g)?;
            g.scale(1.0 / chunk.len() as f64);
            state.step(params, &g)?;
        }
        let mean = total / n as f64;
        info!("epoch {} mean loss {mean:.5}", epoch + 1);
        trace.push(mean);
        if mean < best {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(trace)
}

/// Per-sample inputs that stay fixed during training.
struct SampleInputs<'a> {
    ctx: &'a FeatureContext,
    samples: &'a [Sample],
    /// Invocation-space mashup vector per sample (slot into `graph_vm`).
    vm_slot: Vec<usize>,
    graph_vm: Vec<Vec<f64>>,
}

impl<'a> SampleInputs<'a> {
    fn new(ctx: &'a FeatureContext, samples: &'a [Sample], graph: bool) -> Self {
        let mut slots: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut graph_vm = Vec::new();
        let mut vm_slot = Vec::new();
        if graph {
            for s in samples {
                let mut key = (s.mashup, s.selected.clone());
                key.1.sort_unstable();
                let slot = *slots.entry(key).or_insert_with(|| {
                    let target = Target::from_mashup(&ctx.repo, s.mashup);
                    graph_vm.push(ctx.mashup_representation(&target, &s.selected).v_m);
                    graph_vm.len() - 1
                });
                vm_slot.push(slot);
            }
        }
        Self { ctx, samples, vm_slot, graph_vm }
    }

    fn graph_triple(&self, i: usize) -> Triple<'_> {
        let s = &self.samples[i];
        Triple {
            v_m: &self.graph_vm[self.vm_slot[i]],
            selected: s.selected.iter().map(|&x| self.ctx.service_vector(x)).collect(),
            v_s: self.ctx.service_vector(s.candidate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Entity {
    Mashup(usize),
    Service(usize),
}

/// Content features of every entity in a batch, computed once each.
struct ContentBatch {
    slots: BTreeMap<Entity, usize>,
    feats: Vec<Vec<f64>>,
    caches: Vec<ContentCache>,
    grads: Vec<Vec<f64>>,
}

impl ContentBatch {
    fn new(ex: &ContentExtractor, p: &ParamSet, ctx: &FeatureContext, samples: &[&Sample]) -> Result<Self> {
        let mut slots = BTreeMap::new();
        for s in samples {
            slots.insert(Entity::Mashup(s.mashup), 0);
            for &x in s.selected.iter().chain([&s.candidate]) {
                slots.insert(Entity::Service(x), 0);
            }
        }
        let mut feats = Vec::with_capacity(slots.len());
        let mut caches = Vec::with_capacity(slots.len());
        for (i, (entity, slot)) in slots.iter_mut().enumerate() {
            *slot = i;
            let text = match *entity {
                Entity::Mashup(m) => &ctx.mashup_texts[m],
                Entity::Service(s) => &ctx.service_texts[s],
            };
            let (f, c) = ex.forward(p, text)?;
            feats.push(f.v);
            caches.push(c);
        }
        let grads = feats.iter().map(|f| vec![0.0; f.len()]).collect();
        Ok(Self { slots, feats, caches, grads })
    }

    fn slot(&self, e: Entity) -> usize {
        self.slots[&e]
    }

    fn triple(&self, s: &Sample) -> Triple<'_> {
        Triple {
            v_m: &self.feats[self.slot(Entity::Mashup(s.mashup))],
            selected: s.selected.iter().map(|&x| self.feats[self.slot(Entity::Service(x))].as_slice()).collect(),
            v_s: &self.feats[self.slot(Entity::Service(s.candidate))],
        }
    }

    fn add_grad(&mut self, e: Entity, g: &[f64]) {
        let slot = self.slot(e);
        for (a, b) in self.grads[slot].iter_mut().zip(g) {
            *a += b;
        }
    }

    fn backward(&self, ex: &ContentExtractor, p: &ParamSet, g: &mut Gradients) {
        for (cache, dv) in self.caches.iter().zip(&self.grads) {
            if dv.iter().any(|&x| x != 0.0) {
                ex.backward(p, cache, dv, g);
            }
        }
    }
}

/// Summed loss of a batch through the whole network, with gradients flowing
/// into the content extractor when the network has one.
fn batch_loss(net: &Net, p: &ParamSet, inputs: &SampleInputs, idx: &[usize], g: &mut Gradients) -> Result<f64> {
    let batch: Vec<&Sample> = idx.iter().map(|&i| &inputs.samples[i]).collect();
    let mut content = match &net.content {
        Some(ex) => Some(ContentBatch::new(ex, p, inputs.ctx, &batch)?),
        None => None,
    };
    let mut total = 0.0;
    for (&i, s) in idx.iter().zip(&batch) {
        let x = NetInput {
            content: content.as_ref().map(|c| c.triple(s)),
            graph: net.uses_graph().then(|| inputs.graph_triple(i)),
        };
        let (loss, grads) = net.loss_and_grad(p, &x, s.label, g)?;
        total += loss;
        if let (Some(cb), Some(tg)) = (content.as_mut(), grads.content) {
            cb.add_grad(Entity::Mashup(s.mashup), &tg.v_m);
            for (&x, d) in s.selected.iter().zip(&tg.selected) {
                cb.add_grad(Entity::Service(x), d);
            }
            cb.add_grad(Entity::Service(s.candidate), &tg.v_s);
        }
    }
    if let (Some(cb), Some(ex)) = (&content, &net.content) {
        cb.backward(ex, p, g);
    }
    Ok(total)
}

fn check_context(arch: &Architecture, ctx: &FeatureContext) -> Result<()> {
    if arch.variant != Variant::Nisr && (arch.vocab_size != ctx.vocab.len() || arch.inception != ctx.config.inception) {
        return Err(Error::invalid("content architecture does not match the feature context"));
    }
    if arch.variant != Variant::Fisr && arch.graph_dim != ctx.graph_dim() {
        return Err(Error::invalid("embedding dimension does not match the feature context"));
    }
    Ok(())
}

/// End-to-end training of FISR or NISR. Node embeddings are inputs, not
/// parameters, so NISR only trains its interaction layers.
pub fn train_separate(ctx: &FeatureContext, arch: &Architecture, role: Role, samples: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    if arch.variant == Variant::Hisr {
        return Err(Error::invalid("the hybrid is trained from its two underlying models"));
    }
    check_context(arch, ctx)?;
    if samples.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let mut params = ParamSet::new();
    let net = Net::new(&mut params, arch, &mut seed::rng(seed::derive(seed, "init")))?;
    let inputs = SampleInputs::new(ctx, samples, net.uses_graph());
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let trace = fit(&mut params, adam, samples.len(), cfg, cfg.epochs, seed::derive(seed, "shuffle"), |p, idx, g| {
        batch_loss(&net, p, &inputs, idx, g)
    })?;
    let meta = ModelMeta {
        arch: arch.clone(),
        role,
        fold: ctx.fold.index,
        seed,
        train: cfg.clone(),
        loss_trace: trace,
        phase_a_epochs: 0,
    };
    Ok(TrainedModel { net, params, meta })
}

/// Copies every array of `src` except its output head into `dst` under
/// `prefix`.
fn load_underlying(dst: &mut ParamSet, src: &ParamSet, prefix: &str) -> Result<()> {
    for p in src.iter().filter(|p| !p.name.starts_with("head.")) {
        let name = format!("{prefix}{}", p.name);
        let id = dst.id(&name).ok_or_else(|| Error::Checkpoint(format!("hybrid has no parameter {name}")))?;
        if dst.param(id).shape != p.shape {
            return Err(Error::Checkpoint(format!("parameter {name}: shape {:?} vs {:?}", p.shape, dst.param(id).shape)));
        }
        dst.get_mut(id).copy_from_slice(&p.data);
    }
    Ok(())
}

/// Transfer-learning training of the hybrid. Phase A freezes both
/// underlying models and trains only the integration layers and head on
/// their cached interaction vectors. Phase B unfreezes everything and
/// fine-tunes at a reduced learning rate.
pub fn train_hybrid(
    ctx: &FeatureContext,
    fisr: &TrainedModel,
    nisr: &TrainedModel,
    samples: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let (fa, na) = (&fisr.meta.arch, &nisr.meta.arch);
    if fa.variant != Variant::Fisr || na.variant != Variant::Nisr {
        return Err(Error::Checkpoint("hybrid training needs one fisr and one nisr model".into()));
    }
    if fa.strategy != na.strategy || fa.attention_hidden != na.attention_hidden || fa.interaction_hidden != na.interaction_hidden {
        return Err(Error::Checkpoint("fisr and nisr models have different architectures".into()));
    }
    if fisr.meta.fold != nisr.meta.fold || fisr.meta.role != nisr.meta.role {
        return Err(Error::Checkpoint("fisr and nisr models come from different folds or roles".into()));
    }
    let arch = Architecture { graph_dim: na.graph_dim, ..fa.with_variant(Variant::Hisr) };
    check_context(&arch, ctx)?;
    if samples.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let mut params = ParamSet::new();
    let net = Net::new(&mut params, &arch, &mut seed::rng(seed::derive(seed, "init")))?;
    load_underlying(&mut params, &fisr.params, "fisr.")?;
    load_underlying(&mut params, &nisr.params, "nisr.")?;
    let inputs = SampleInputs::new(ctx, samples, true);

    // phase A: frozen encoders, so their outputs are computed once
    params.set_trainable("fisr.", false);
    params.set_trainable("nisr.", false);
    let ex = net.content.as_ref().expect("hybrid has a content pathway");
    let mut encoded = Vec::with_capacity(samples.len());
    for chunk in (0..samples.len()).collect::<Vec<_>>().chunks(256) {
        let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
        let cb = ContentBatch::new(ex, &params, ctx, &batch)?;
        for (&i, s) in chunk.iter().zip(&batch) {
            let x = NetInput { content: Some(cb.triple(s)), graph: Some(inputs.graph_triple(i)) };
            encoded.push(net.encode(&params, &x)?.0);
        }
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut trace = fit(&mut params, adam, samples.len(), cfg, cfg.epochs, seed::derive(seed, "phase-a"), |p, idx, g| {
        let mut total = 0.0;
        for &i in idx {
            let top = net.top_forward(p, &encoded[i])?;
            total += net.top_backward(p, &top, samples[i].label, g).0;
        }
        Ok(total)
    })?;
    let phase_a_epochs = trace.len();

    params.set_trainable("", true);
    if cfg.finetune_epochs > 0 {
        let adam = AdamConfig { lr: cfg.lr * cfg.finetune_lr_factor, ..AdamConfig::default() };
        let tuned = fit(&mut params, adam, samples.len(), cfg, cfg.finetune_epochs, seed::derive(seed, "phase-b"), |p, idx, g| {
            batch_loss(&net, p, &inputs, idx, g)
        })?;
        trace.extend(tuned);
    }
    let meta = ModelMeta {
        arch,
        role: fisr.meta.role,
        fold: ctx.fold.index,
        seed,
        train: cfg.clone(),
        loss_trace: trace,
        phase_a_epochs,
    };
    Ok(TrainedModel { net, params, meta })
}

fn role_samples(ctx: &FeatureContext, cfg: &TrainConfig, role: Role, seed: u64) -> Result<Vec<Sample>> {
    let mut sampling = cfg.sampling.clone();
    match role {
        Role::Cold => sampling.ss_sizes = vec![0],
        Role::Multi if !cfg.separate_cold_start && !sampling.ss_sizes.contains(&0) => sampling.ss_sizes.insert(0, 0),
        Role::Multi => {}
    }
    generate_samples(&ctx.repo, &ctx.fold, Purpose::Train, &sampling, seed::derive(seed, "samples"))
}

/// The cold-start model is shared by every strategy: it always uses the
/// `none` shape and a seed that does not depend on the strategy.
fn role_arch(ctx: &FeatureContext, variant: Variant, strategy: Strategy, role: Role) -> Architecture {
    let strategy = if role == Role::Cold { Strategy::None } else { strategy };
    Architecture::new(variant, strategy, ctx.vocab.len(), ctx.config.inception.clone(), ctx.graph_dim())
}

fn role_seed(seed: u64, variant: Variant, strategy: Strategy, role: Role) -> u64 {
    match role {
        Role::Cold => seed::derive(seed, &format!("{variant}/cold")),
        Role::Multi => seed::derive(seed, &format!("{variant}/{strategy}/multi")),
    }
}

/// Trains the cold-start (if enabled) and multi-round FISR or NISR models of
/// one fold.
pub fn train_recommender(ctx: &FeatureContext, variant: Variant, strategy: Strategy, cfg: &TrainConfig, seed: u64) -> Result<Recommender> {
    let cold = if cfg.separate_cold_start { Some(train_role(ctx, variant, strategy, Role::Cold, cfg, seed)?) } else { None };
    let multi = train_role(ctx, variant, strategy, Role::Multi, cfg, seed)?;
    Ok(Recommender { cold, multi })
}

/// One of the two models [`train_recommender`] builds. The cold-start model
/// comes out the same for every `strategy`.
pub fn train_role(ctx: &FeatureContext, variant: Variant, strategy: Strategy, role: Role, cfg: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    let samples = role_samples(ctx, cfg, role, seed)?;
    info!("training {variant} {role:?} ({strategy}) on {} samples", samples.len());
    train_separate(ctx, &role_arch(ctx, variant, strategy, role), role, &samples, cfg, role_seed(seed, variant, strategy, role))
}

/// Hybrid counterpart of [`train_recommender`], built from trained FISR and
/// NISR recommenders of the same fold.
pub fn train_hybrid_recommender(ctx: &FeatureContext, fisr: &Recommender, nisr: &Recommender, cfg: &TrainConfig, seed: u64) -> Result<Recommender> {
    let strategy = fisr.multi.meta.arch.strategy;
    let train = |role, f: &TrainedModel, n: &TrainedModel| -> Result<TrainedModel> {
        let samples = role_samples(ctx, cfg, role, seed)?;
        info!("training hisr {role:?} ({strategy}) on {} samples", samples.len());
        train_hybrid(ctx, f, n, &samples, cfg, role_seed(seed, Variant::Hisr, strategy, role))
    };
    let cold = match (&fisr.cold, &nisr.cold) {
        (Some(f), Some(n)) if cfg.separate_cold_start => Some(train(Role::Cold, f, n)?),
        (None, None) if !cfg.separate_cold_start => None,
        _ => return Err(Error::Checkpoint("underlying models disagree on the cold-start model".into())),
    };
    let multi = train(Role::Multi, &fisr.multi, &nisr.multi)?;
    Ok(Recommender { cold, multi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, kinked_coordinates};
    use crate::recmodel::features::fixture::tiny_context;
    use rand::Rng;

    fn small_arch(ctx: &FeatureContext, variant: Variant, strategy: Strategy) -> Architecture {
        Architecture {
            attention_hidden: vec![4, 3],
            interaction_hidden: vec![5, 3],
            integration_hidden: vec![4, 3],
            ..Architecture::new(variant, strategy, ctx.vocab.len(), ctx.config.inception.clone(), ctx.graph_dim())
        }
    }

    fn samples(ctx: &FeatureContext, sizes: Vec<usize>) -> Vec<Sample> {
        let cfg = SamplingConfig { ss_sizes: sizes, ..SamplingConfig::default() };
        generate_samples(&ctx.repo, &ctx.fold, Purpose::Train, &cfg, 4).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig { epochs: 3, finetune_epochs: 1, lr: 3e-3, ..TrainConfig::default() }
    }

    /// One positive and one negative with the given selection size.
    fn pair(all: &[Sample], size: usize, k: usize) -> Vec<Sample> {
        let pos = all.iter().filter(|s| s.selected.len() == size && s.label).nth(k).unwrap();
        let neg = all.iter().find(|s| s.mashup == pos.mashup && s.selected == pos.selected && !s.label).unwrap();
        vec![pos.clone(), neg.clone()]
    }

    /// Strict gradient check of a whole network on one positive/negative
    /// pair, at a point with random biases. Pairs lying within `h` of an
    /// activation kink are skipped in favour of the next one, since finite
    /// differences are undefined there.
    fn check_full(variant: Variant, strategy: Strategy, seed: u64, ctx: &FeatureContext, all: &[Sample], frozen: &[&str]) {
        let arch = small_arch(ctx, variant, strategy);
        let mut params = ParamSet::new();
        let net = Net::new(&mut params, &arch, &mut seed::rng(seed)).unwrap();
        // zero biases put padded positions exactly on the activation kink
        let mut rng = seed::rng(seed::derive(seed, "bias"));
        for p in params.iter_mut().filter(|p| p.name.ends_with(".b")) {
            p.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
        for prefix in frozen {
            params.set_trainable(prefix, false);
        }
        for attempt in 0..8 {
            let batch = pair(all, 1 + seed as usize % 3, seed as usize + 20 * attempt);
            let inputs = SampleInputs::new(ctx, &batch, net.uses_graph());
            let loss = |p: &ParamSet| {
                let mut g = p.zero_grads();
                let loss = batch_loss(&net, p, &inputs, &[0, 1], &mut g).unwrap();
                (loss, g)
            };
            if !kinked_coordinates(&params, |p| loss(p).0, 1e-5).is_empty() {
                continue;
            }
            let report = grad_check(&params, loss, 1e-5, 1e-4);
            assert!(report.passed, "{variant} {strategy} seed {seed}: {report:?}");
            return;
        }
        panic!("no kink-free sample pair for seed {seed}");
    }

    #[test]
    fn fisr_end_to_end_gradients() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1, 2, 3]);
        for seed in 0..20 {
            check_full(Variant::Fisr, Strategy::Attention, seed, &ctx, &all, &[]);
        }
    }

    #[test]
    fn hybrid_head_gradients() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1, 2, 3]);
        for seed in 0..20 {
            check_full(Variant::Hisr, Strategy::Attention, seed, &ctx, &all, &["fisr.", "nisr."]);
        }
        check_full(Variant::Hisr, Strategy::Attention, 99, &ctx, &all, &[]);
    }

    #[test]
    fn nisr_gradients_every_strategy() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1, 2, 3]);
        for (i, s) in Strategy::ALL.into_iter().enumerate() {
            check_full(Variant::Nisr, s, i as u64, &ctx, &all, &[]);
        }
    }

    #[test]
    fn training_is_deterministic_and_loss_falls() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1, 2]);
        let arch = small_arch(&ctx, Variant::Fisr, Strategy::Attention);
        let a = train_separate(&ctx, &arch, Role::Multi, &all, &quick(), 5).unwrap();
        let b = train_separate(&ctx, &arch, Role::Multi, &all, &quick(), 5).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.meta, b.meta);
        let t = &a.meta.loss_trace;
        assert!(t.last().unwrap() < t.first().unwrap(), "{t:?}");
        assert!(train_separate(&ctx, &arch, Role::Multi, &[], &quick(), 5).is_err());
    }

    #[test]
    fn separable_toy_is_learned() {
        let mut rng = seed::rng(8);
        let points: Vec<(Vec<f64>, bool)> = (0..400)
            .map(|_| {
                let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let label = v[0] + 0.5 * v[1] > 0.0;
                (v, label)
            })
            .collect();
        let arch = Architecture {
            attention_hidden: vec![4, 3],
            interaction_hidden: vec![8, 4],
            ..Architecture::new(Variant::Nisr, Strategy::None, 0, Default::default(), 2)
        };
        let mut params = ParamSet::new();
        let net = Net::new(&mut params, &arch, &mut seed::rng(1)).unwrap();
        const ZERO: [f64; 2] = [0.0, 0.0];
        fn input(v: &[f64]) -> NetInput<'_> {
            NetInput { content: None, graph: Some(Triple { v_m: &ZERO, selected: Vec::new(), v_s: v }) }
        }
        let cfg = TrainConfig { epochs: 60, patience: 60, lr: 1e-2, ..TrainConfig::default() };
        fit(&mut params, AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, points.len(), &cfg, cfg.epochs, 2, |p, idx, g| {
            let mut total = 0.0;
            for &i in idx {
                total += net.loss_and_grad(p, &input(&points[i].0), points[i].1, g)?.0;
            }
            Ok(total)
        })
        .unwrap();
        let correct = points.iter().filter(|(v, y)| (net.predict(&params, &input(v)).unwrap().0 > 0.5) == *y).count();
        assert!(correct as f64 / points.len() as f64 > 0.95, "{correct}/400");
    }

    #[test]
    fn hybrid_freeze_contract() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1, 2]);
        let cfg = TrainConfig { finetune_epochs: 0, ..quick() };
        let f = train_separate(&ctx, &small_arch(&ctx, Variant::Fisr, Strategy::Attention), Role::Multi, &all, &cfg, 1).unwrap();
        let n = train_separate(&ctx, &small_arch(&ctx, Variant::Nisr, Strategy::Attention), Role::Multi, &all, &cfg, 2).unwrap();
        let h = train_hybrid(&ctx, &f, &n, &all, &cfg, 3).unwrap();
        for (src, prefix) in [(&f.params, "fisr."), (&n.params, "nisr.")] {
            for p in src.iter().filter(|p| !p.name.starts_with("head.")) {
                let mine = h.params.by_name(&format!("{prefix}{}", p.name)).unwrap();
                assert_eq!(mine.data, p.data, "{prefix}{}", p.name);
            }
        }
        let t = &h.meta.loss_trace;
        assert_eq!(h.meta.phase_a_epochs, t.len());
        assert!(t.last().unwrap() < t.first().unwrap(), "{t:?}");

        let tuned = train_hybrid(&ctx, &f, &n, &all, &TrainConfig { finetune_epochs: 1, ..quick() }, 3).unwrap();
        assert_eq!(tuned.meta.loss_trace.len(), tuned.meta.phase_a_epochs + 1);
        let moved = f.params.iter().any(|p| tuned.params.by_name(&format!("fisr.{}", p.name)).is_some_and(|q| q.data != p.data));
        assert!(moved, "fine-tuning left the content pathway untouched");

        let other = train_separate(&ctx, &small_arch(&ctx, Variant::Nisr, Strategy::None), Role::Multi, &all, &cfg, 2).unwrap();
        assert!(train_hybrid(&ctx, &f, &other, &all, &cfg, 3).is_err());
        assert!(train_hybrid(&ctx, &n, &f, &all, &cfg, 3).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let ctx = tiny_context();
        let all = samples(&ctx, vec![1]);
        let m = train_separate(&ctx, &small_arch(&ctx, Variant::Nisr, Strategy::Concat), Role::Multi, &all, &quick(), 1).unwrap();
        let bytes = m.to_checkpoint().unwrap().to_bytes().unwrap();
        let back = TrainedModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.meta, m.meta);
        let mut ckpt = m.to_checkpoint().unwrap();
        ckpt.manifest["arch"]["strategy"] = "attention".into();
        assert!(TrainedModel::from_checkpoint(&ckpt).is_err());
    }
}
