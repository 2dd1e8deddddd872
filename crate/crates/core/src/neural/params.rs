use std::collections::HashMap;

use rand::Rng;

use crate::{Error, Result};

/// A named, shaped parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Frozen parameters are skipped by the optimizer.
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of every learnable array of a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], data: Vec<f64>) -> Result<ParamId> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "parameter {name}: shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if self.by_name.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter name {name}")));
        }
        let id = self.params.len();
        self.by_name.insert(name.to_string(), id);
        self.params.push(Param {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
            trainable: true,
        });
        Ok(ParamId(id))
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].data
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.param(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Sets the trainable flag of every parameter whose name starts with `prefix`.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) {
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.trainable = trainable;
        }
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            data: self.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    /// Copies every array of `src` whose name, after prefixing with
    /// `prefix`, exists here. Shapes must agree exactly.
    pub fn load_from(&mut self, src: &ParamSet, prefix: &str) -> Result<usize> {
        let mut n = 0;
        for p in src.iter() {
            let name = format!("{prefix}{}", p.name);
            let Some(id) = self.id(&name) else {
                return Err(Error::Checkpoint(format!("no parameter {name} in target architecture")));
            };
            let dst = &mut self.params[id.0];
            if dst.shape != p.shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} does not match {:?}",
                    p.shape, dst.shape
                )));
            }
            dst.data.copy_from_slice(&p.data);
            n += 1;
        }
        Ok(n)
    }
}

/// Gradient buffer mirroring a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    data: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.data[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.data[id.0]
    }

    pub(crate) fn by_index(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.data.iter_mut().flatten() {
            *g *= factor;
        }
    }

    pub fn reset(&mut self) {
        for g in self.data.iter_mut().flatten() {
            *g = 0.0;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().flatten().all(|g| g.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Uniform samples in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}
