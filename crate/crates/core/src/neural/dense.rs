use rand::Rng;

use super::{affine, affine_backward, ensure_finite, prelu, xavier_uniform, Gradients, ParamId, ParamSet};
use crate::{Error, Result};

/// Initial slope of every PReLU unit.
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Per-unit learnable leak, `y = z` for `z > 0`, `a z` otherwise.
    PRelu,
    Linear,
}

/// Fully connected layer `y = act(W x + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub slope: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Vec<f64>,
    z: Vec<f64>,
}

impl Dense {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        act: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = params.add(
            &format!("{name}.w"),
            &[out_dim, in_dim],
            xavier_uniform(rng, in_dim, out_dim, out_dim * in_dim),
        )?;
        let b = params.add(&format!("{name}.b"), &[out_dim], vec![0.0; out_dim])?;
        let slope = match act {
            Activation::PRelu => {
                Some(params.add(&format!("{name}.slope"), &[out_dim], vec![PRELU_INIT; out_dim])?)
            }
            Activation::Linear => None,
        };
        Ok(Self { w, b, slope, in_dim, out_dim })
    }

    pub fn forward(&self, p: &ParamSet, x: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        if x.len() != self.in_dim {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        ensure_finite(x, "dense layer input")?;
        let mut z = vec![0.0; self.out_dim];
        affine(p.get(self.w), p.get(self.b), x, &mut z);
        let y = match self.slope {
            Some(a) => z.iter().zip(p.get(a)).map(|(&z, &a)| prelu(z, a)).collect(),
            None => z.clone(),
        };
        Ok((y, DenseCache { x: x.to_vec(), z }))
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, p: &ParamSet, cache: &DenseCache, dy: &[f64], g: &mut Gradients) -> Vec<f64> {
        let dz: Vec<f64> = match self.slope {
            Some(a_id) => {
                let a = p.get(a_id);
                let da = g.get_mut(a_id);
                dy.iter()
                    .zip(&cache.z)
                    .enumerate()
                    .map(|(o, (&d, &z))| {
                        if z > 0.0 {
                            d
                        } else {
                            da[o] += d * z;
                            d * a[o]
                        }
                    })
                    .collect()
            }
            None => dy.to_vec(),
        };
        for (gb, d) in g.get_mut(self.b).iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dx = vec![0.0; self.in_dim];
        affine_backward(p.get(self.w), &cache.x, &dz, g.get_mut(self.w), Some(&mut dx));
        dx
    }
}

/// Stack of dense layers: PReLU hidden layers with an optional linear head.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub type MlpCache = Vec<DenseCache>;

impl Mlp {
    /// Hidden layers of the given widths with PReLU, then (if `head` is set)
    /// a linear layer of that width.
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        hidden: &[usize],
        head: Option<usize>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        let mut d = in_dim;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Dense::new(params, &format!("{name}.l{i}"), d, h, Activation::PRelu, rng)?);
            d = h;
        }
        if let Some(out) = head {
            layers.push(Dense::new(params, &format!("{name}.out"), d, out, Activation::Linear, rng)?);
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, p: &ParamSet, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for l in &self.layers {
            let (y, c) = l.forward(p, &h)?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    pub fn backward(&self, p: &ParamSet, caches: &MlpCache, dy: &[f64], g: &mut Gradients) -> Vec<f64> {
        let mut d = dy.to_vec();
        for (l, c) in self.layers.iter().zip(caches).rev() {
            d = l.backward(p, c, &d, g);
        }
        d
    }
}
