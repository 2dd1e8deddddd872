use rand::Rng;
use serde::{Deserialize, Serialize};

use super::interaction::{InteractionCache, InteractionModule, TripleGrad};
use super::interaction::{ATTENTION_HIDDEN, INTEGRATION_HIDDEN, INTERACTION_HIDDEN};
use super::{Strategy, Variant};
use crate::neural::{cross_entropy, softmax, softmax_backward, Activation, Dense, DenseCache, Gradients, Mlp, MlpCache, ParamSet};
use crate::textfeat::{ContentExtractor, InceptionConfig};
use crate::{Error, Result};

/// Shape of a model; stored in every checkpoint manifest so the network can
/// be rebuilt before its parameters are loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub variant: Variant,
    pub strategy: Strategy,
    pub vocab_size: usize,
    pub inception: InceptionConfig,
    pub graph_dim: usize,
    pub attention_hidden: Vec<usize>,
    pub interaction_hidden: Vec<usize>,
    pub integration_hidden: Vec<usize>,
}

impl Architecture {
    pub fn new(variant: Variant, strategy: Strategy, vocab_size: usize, inception: InceptionConfig, graph_dim: usize) -> Self {
        Self {
            variant,
            strategy,
            vocab_size,
            inception,
            graph_dim,
            attention_hidden: ATTENTION_HIDDEN.to_vec(),
            interaction_hidden: INTERACTION_HIDDEN.to_vec(),
            integration_hidden: INTEGRATION_HIDDEN.to_vec(),
        }
    }

    /// The same shape with a different variant, as used by the two
    /// underlying models of a hybrid.
    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..self.clone() }
    }
}

/// Per-pathway inputs: mashup vector, selected-service vectors, candidate.
#[derive(Debug, Clone)]
pub struct Triple<'a> {
    pub v_m: &'a [f64],
    pub selected: Vec<&'a [f64]>,
    pub v_s: &'a [f64],
}

#[derive(Debug, Clone, Default)]
pub struct NetInput<'a> {
    pub content: Option<Triple<'a>>,
    pub graph: Option<Triple<'a>>,
}

#[derive(Debug, Clone)]
pub struct EncodeCache {
    content: Option<InteractionCache>,
    graph: Option<InteractionCache>,
}

impl EncodeCache {
    /// Aggregation weights over the selected services; for a hybrid, the
    /// mean of both pathways' weights.
    pub fn weights(&self) -> Vec<f64> {
        let all: Vec<&Vec<f64>> =
            [&self.content, &self.graph].into_iter().flatten().map(|c| &c.agg.weights).filter(|w| !w.is_empty()).collect();
        match all.len() {
            0 => Vec::new(),
            1 => all[0].clone(),
            n => (0..all[0].len()).map(|i| all.iter().map(|w| w[i]).sum::<f64>() / n as f64).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TopCache {
    integrate: Option<MlpCache>,
    head: DenseCache,
    /// Class probabilities; index 1 is the positive class.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct NetGrads {
    pub content: Option<TripleGrad>,
    pub graph: Option<TripleGrad>,
}

/// One of the three model variants. Parameter names: FISR uses `content.*`,
/// `attn.*`, `interact.*`; NISR uses `attn.*`, `interact.*`; HISR prefixes
/// those with `fisr.` and `nisr.` and adds `integrate.*`. All variants end in
/// a 2-unit `head.*`.
#[derive(Debug, Clone)]
pub struct Net {
    pub arch: Architecture,
    pub content: Option<ContentExtractor>,
    pub content_interaction: Option<InteractionModule>,
    pub graph_interaction: Option<InteractionModule>,
    pub integrate: Option<Mlp>,
    pub head: Dense,
}

impl Net {
    pub fn new(params: &mut ParamSet, arch: &Architecture, rng: &mut impl Rng) -> Result<Self> {
        let (content_prefix, graph_prefix) = match arch.variant {
            Variant::Hisr => ("fisr.", "nisr."),
            _ => ("", ""),
        };
        let mut content = None;
        let mut content_interaction = None;
        let mut graph_interaction = None;
        if arch.variant != Variant::Nisr {
            if arch.vocab_size < 2 {
                return Err(Error::invalid("content pathway needs a vocabulary"));
            }
            let ex = ContentExtractor::new(params, &format!("{content_prefix}content"), arch.vocab_size, arch.inception.clone(), rng)?;
            let d = ex.dim();
            content_interaction = Some(Self::interaction(params, content_prefix, arch, d, rng)?);
            content = Some(ex);
        }
        if arch.variant != Variant::Fisr {
            if arch.graph_dim == 0 {
                return Err(Error::invalid("invocation pathway needs a positive embedding dimension"));
            }
            graph_interaction = Some(Self::interaction(params, graph_prefix, arch, arch.graph_dim, rng)?);
        }
        let inter_dim = |m: &Option<InteractionModule>| m.as_ref().map_or(0, InteractionModule::out_dim);
        let encoded = inter_dim(&content_interaction) + inter_dim(&graph_interaction);
        let (integrate, head_in) = if arch.variant == Variant::Hisr {
            let mlp = Mlp::new(params, "integrate", encoded, &arch.integration_hidden, None, rng)?;
            let d = mlp.out_dim();
            (Some(mlp), d)
        } else {
            (None, encoded)
        };
        let head = Dense::new(params, "head", head_in, 2, Activation::Linear, rng)?;
        Ok(Self { arch: arch.clone(), content, content_interaction, graph_interaction, integrate, head })
    }

    fn interaction(params: &mut ParamSet, prefix: &str, arch: &Architecture, dim: usize, rng: &mut impl Rng) -> Result<InteractionModule> {
        let widths = (arch.attention_hidden.as_slice(), arch.interaction_hidden.as_slice());
        InteractionModule::new(params, prefix, arch.strategy, (dim, dim), widths, rng)
    }

    pub fn uses_content(&self) -> bool {
        self.content.is_some()
    }

    pub fn uses_graph(&self) -> bool {
        self.graph_interaction.is_some()
    }

    /// Interaction vector(s): `ci` for FISR, `hi` for NISR, `ci ⊕ hi` for HISR.
    pub fn encode(&self, p: &ParamSet, x: &NetInput) -> Result<(Vec<f64>, EncodeCache)> {
        let mut z = Vec::new();
        let mut cache = EncodeCache { content: None, graph: None };
        for (module, input, slot) in [
            (&self.content_interaction, &x.content, &mut cache.content),
            (&self.graph_interaction, &x.graph, &mut cache.graph),
        ] {
            if let Some(m) = module {
                let t = input.as_ref().ok_or_else(|| Error::invalid("missing input for a model pathway"))?;
                let (i, c) = m.forward(p, t.v_m, &t.selected, t.v_s)?;
                z.extend(i);
                *slot = Some(c);
            }
        }
        Ok((z, cache))
    }

    pub fn encode_backward(&self, p: &ParamSet, cache: &EncodeCache, dz: &[f64], g: &mut Gradients) -> NetGrads {
        let mut out = NetGrads::default();
        let mut offset = 0;
        if let (Some(m), Some(c)) = (&self.content_interaction, &cache.content) {
            out.content = Some(m.backward(p, c, &dz[..m.out_dim()], g));
            offset = m.out_dim();
        }
        if let (Some(m), Some(c)) = (&self.graph_interaction, &cache.graph) {
            out.graph = Some(m.backward(p, c, &dz[offset..offset + m.out_dim()], g));
        }
        out
    }

    /// Integration (hybrid only) and the softmax output head.
    pub fn top_forward(&self, p: &ParamSet, z: &[f64]) -> Result<TopCache> {
        let (h, integrate) = match &self.integrate {
            Some(mlp) => {
                let (h, c) = mlp.forward(p, z)?;
                (h, Some(c))
            }
            None => (z.to_vec(), None),
        };
        let (logits, head) = self.head.forward(p, &h)?;
        let probs = softmax(&logits)?;
        Ok(TopCache { integrate, head, probs })
    }

    /// Cross-entropy of the positive-class probability; returns the loss and
    /// the gradient w.r.t. the encoded vector.
    pub fn top_backward(&self, p: &ParamSet, cache: &TopCache, label: bool, g: &mut Gradients) -> (f64, Vec<f64>) {
        let (loss, dpred) = cross_entropy(cache.probs[1], label);
        let dlogits = softmax_backward(&cache.probs, &[0.0, dpred]);
        let dh = self.head.backward(p, &cache.head, &dlogits, g);
        let dz = match (&self.integrate, &cache.integrate) {
            (Some(mlp), Some(c)) => mlp.backward(p, c, &dh, g),
            _ => dh,
        };
        (loss, dz)
    }

    /// Positive-class probability `r̂`.
    pub fn predict(&self, p: &ParamSet, x: &NetInput) -> Result<(f64, EncodeCache)> {
        let (z, enc) = self.encode(p, x)?;
        let top = self.top_forward(p, &z)?;
        Ok((top.probs[1], enc))
    }

    /// Forward and backward for one labelled input.
    pub fn loss_and_grad(&self, p: &ParamSet, x: &NetInput, label: bool, g: &mut Gradients) -> Result<(f64, NetGrads)> {
        let (z, enc) = self.encode(p, x)?;
        let top = self.top_forward(p, &z)?;
        let (loss, dz) = self.top_backward(p, &top, label, g);
        Ok((loss, self.encode_backward(p, &enc, &dz, g)))
    }
}
