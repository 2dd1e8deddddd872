//! 1-D convolution over a sequence whose tail is constant.
//!
//! Padded text embeds to a run of identical (zero) rows after the real
//! tokens. Every convolution output whose window lies entirely inside that
//! run is the same vector, so a sequence is stored as its "live" prefix plus
//! one tail row and a repeat count. Forward and backward passes are exact;
//! tail gradients are carried as the sum over all tail positions.

use rand::Rng;

use super::{affine, affine_backward, prelu, xavier_uniform, Gradients, ParamId, ParamSet};
use crate::{Error, Result};

/// Sequence of `len()` rows of width `dim`: `live` rows followed by
/// `tail_len` copies of `tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    pub dim: usize,
    pub live: Vec<f64>,
    pub tail: Vec<f64>,
    pub tail_len: usize,
}

impl Seq {
    pub fn n_live(&self) -> usize {
        self.live.len() / self.dim
    }

    pub fn len(&self) -> usize {
        self.n_live() + self.tail_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expanded row-major `len() x dim` matrix.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = self.live.clone();
        for _ in 0..self.tail_len {
            out.extend_from_slice(&self.tail);
        }
        out
    }

    /// Mean over all positions.
    pub fn mean_pool(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut out: Vec<f64> = self.tail.iter().map(|t| t * self.tail_len as f64).collect();
        for row in self.live.chunks(self.dim) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Gradient of [`Seq::mean_pool`]: the same `dy / len` at every position.
    pub fn mean_pool_backward(&self, dy: &[f64]) -> SeqGrad {
        let n = self.len() as f64;
        let per: Vec<f64> = dy.iter().map(|d| d / n).collect();
        let mut live = Vec::with_capacity(self.live.len());
        for _ in 0..self.n_live() {
            live.extend_from_slice(&per);
        }
        SeqGrad {
            live,
            tail: per.iter().map(|p| p * self.tail_len as f64).collect(),
        }
    }
}

/// Gradient w.r.t. a [`Seq`]: per live row, and summed over tail positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqGrad {
    pub live: Vec<f64>,
    pub tail: Vec<f64>,
}

/// Valid (unpadded) 1-D convolution with PReLU, `out_ch` filters of width
/// `window` over `in_ch` input channels.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub slope: ParamId,
    pub window: usize,
    pub in_ch: usize,
    pub out_ch: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    /// Live input rows followed by enough tail copies to complete every live window.
    ext: Vec<f64>,
    n_live_in: usize,
    tail_in: Vec<f64>,
    z_live: Vec<f64>,
    z_tail: Vec<f64>,
    n_live_out: usize,
}


impl Conv1d {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        window: usize,
        in_ch: usize,
        out_ch: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let fan = window * in_ch;
        let w = params.add(
            &format!("{name}.w"),
            &[out_ch, window, in_ch],
            xavier_uniform(rng, fan, window * out_ch, out_ch * fan),
        )?;
        let b = params.add(&format!("{name}.b"), &[out_ch], vec![0.0; out_ch])?;
        let slope = params.add(&format!("{name}.slope"), &[out_ch], vec![super::dense::PRELU_INIT; out_ch])?;
        Ok(Self { w, b, slope, window, in_ch, out_ch })
    }

    fn activate(&self, a: &[f64], z: &[f64]) -> Vec<f64> {
        z.iter().zip(a).map(|(&z, &a)| prelu(z, a)).collect()
    }

    pub fn forward(&self, p: &ParamSet, x: &Seq) -> Result<(Seq, ConvCache)> {
        if x.dim != self.in_ch {
            return Err(Error::shape(format!(
                "convolution expects {} channels, got {}",
                self.in_ch, x.dim
            )));
        }
        if x.len() < self.window {
            return Err(Error::shape(format!(
                "sequence of length {} shorter than window {}",
                x.len(),
                self.window
            )));
        }
        let (w, b, a) = (p.get(self.w), p.get(self.b), p.get(self.slope));
        let out_len = x.len() - self.window + 1;
        let n_live_in = x.n_live();
        let n_live_out = out_len.min(n_live_in);
        let pad = (self.window - 1).min(x.tail_len);
        let mut ext = Vec::with_capacity((n_live_in + pad) * self.in_ch);
        ext.extend_from_slice(&x.live);
        for _ in 0..pad {
            ext.extend_from_slice(&x.tail);
        }
        let span = self.window * self.in_ch;
        let mut z_live = vec![0.0; n_live_out * self.out_ch];
        for t in 0..n_live_out {
            let win = &ext[t * self.in_ch..t * self.in_ch + span];
            affine(w, b, win, &mut z_live[t * self.out_ch..(t + 1) * self.out_ch]);
        }
        let tail_win: Vec<f64> = x.tail.repeat(self.window);
        let mut z_tail = vec![0.0; self.out_ch];
        affine(w, b, &tail_win, &mut z_tail);

        let live: Vec<f64> = z_live
            .chunks(self.out_ch)
            .flat_map(|z| self.activate(a, z))
            .collect();
        let out = Seq {
            dim: self.out_ch,
            live,
            tail: self.activate(a, &z_tail),
            tail_len: out_len - n_live_out,
        };
        Ok((
            out,
            ConvCache {
                ext,
                n_live_in,
                tail_in: x.tail.clone(),
                z_live,
                z_tail,
                n_live_out,
            },
        ))
    }

    pub fn backward(&self, p: &ParamSet, cache: &ConvCache, dy: &SeqGrad, g: &mut Gradients) -> SeqGrad {
        let (w, a) = (p.get(self.w), p.get(self.slope));
        let oc = self.out_ch;
        let mut da = vec![0.0; oc];
        let mut pre = |z: &[f64], d: &[f64]| -> Vec<f64> {
            z.iter()
                .zip(d)
                .enumerate()
                .map(|(o, (&z, &d))| {
                    if z > 0.0 {
                        d
                    } else {
                        da[o] += d * z;
                        d * a[o]
                    }
                })
                .collect::<Vec<f64>>()
        };
        let dz_live: Vec<f64> = cache
            .z_live
            .chunks(oc)
            .zip(dy.live.chunks(oc))
            .flat_map(|(z, d)| pre(z, d))
            .collect();
        let dz_tail = pre(&cache.z_tail, &dy.tail);
        for (s, d) in g.get_mut(self.slope).iter_mut().zip(&da) {
            *s += d;
        }
        {
            let gb = g.get_mut(self.b);
            for dz in dz_live.chunks(oc).chain(std::iter::once(dz_tail.as_slice())) {
                for (gbo, d) in gb.iter_mut().zip(dz) {
                    *gbo += d;
                }
            }
        }

        let span = self.window * self.in_ch;
        let mut d_ext = vec![0.0; cache.ext.len()];
        {
            let gw = g.get_mut(self.w);
            for t in 0..cache.n_live_out {
                let lo = t * self.in_ch;
                affine_backward(
                    w,
                    &cache.ext[lo..lo + span],
                    &dz_live[t * oc..(t + 1) * oc],
                    gw,
                    Some(&mut d_ext[lo..lo + span]),
                );
            }
            let tail_win = cache.tail_in.repeat(self.window);
            let mut d_tail_win = vec![0.0; span];
            affine_backward(w, &tail_win, &dz_tail, gw, Some(&mut d_tail_win));
            let split = cache.n_live_in * self.in_ch;
            let mut tail = vec![0.0; self.in_ch];
            for row in d_ext[split..].chunks(self.in_ch).chain(d_tail_win.chunks(self.in_ch)) {
                for (t, v) in tail.iter_mut().zip(row) {
                    *t += v;
                }
            }
            d_ext.truncate(split);
            SeqGrad { live: d_ext, tail }
        }
    }
}
