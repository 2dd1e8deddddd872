//! Fixed-op differentiable core.
//!
//! There is no tape: each layer exposes a `forward` that returns its output
//! plus a cache, and a `backward` that consumes the cache, accumulates
//! parameter gradients into a [`Gradients`] buffer and returns the gradient
//! with respect to its input. Models compose these by hand.

mod adam;
mod checkpoint;
mod conv;
mod dense;
mod embedding;
mod gradcheck;
mod ops;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use conv::{Conv1d, ConvCache, Seq, SeqGrad};
pub use dense::{Activation, Dense, DenseCache, Mlp, MlpCache};
pub use embedding::EmbeddingTable;
pub use gradcheck::{grad_check, grad_check_inputs, kinked_coordinates, GradCheckReport, GRAD_CHECK_FLOOR, KINK_TOLERANCE};
pub use ops::{
    concat, cross_entropy, elementwise, ensure_finite, mean_cross_entropy, softmax,
    softmax_backward, Elementwise, PROB_EPS,
};
pub use params::{xavier_uniform, Gradients, Param, ParamId, ParamSet};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = W x + b` for row-major `W` of shape `out x in`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        *yo = b[o] + dot(&w[o * n_in..(o + 1) * n_in], x);
    }
}

/// `dx += W^T dz` and `dW += dz x^T`.
pub(crate) fn affine_backward(w: &[f64], x: &[f64], dz: &[f64], dw: &mut [f64], dx: Option<&mut [f64]>) {
    let n_in = x.len();
    for (o, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dw[o * n_in..(o + 1) * n_in];
        for (r, xi) in row.iter_mut().zip(x) {
            *r += g * xi;
        }
    }
    if let Some(dx) = dx {
        for (o, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &w[o * n_in..(o + 1) * n_in];
            for (d, wi) in dx.iter_mut().zip(row) {
                *d += g * wi;
            }
        }
    }
}

#[inline]
pub(crate) fn prelu(z: f64, a: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        a * z
    }
}
