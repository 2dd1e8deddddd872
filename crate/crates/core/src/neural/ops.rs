use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Mul,
    Sub,
    Concat,
}

pub fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

pub fn elementwise(op: Elementwise, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    match op {
        Elementwise::Concat => Ok(concat(&[u, v])),
        Elementwise::Mul | Elementwise::Sub if u.len() != v.len() => Err(Error::shape(format!(
            "element-wise {op:?} on lengths {} and {}",
            u.len(),
            v.len()
        ))),
        Elementwise::Mul => Ok(u.iter().zip(v).map(|(a, b)| a * b).collect()),
        Elementwise::Sub => Ok(u.iter().zip(v).map(|(a, b)| a - b).collect()),
    }
}

/// Max-subtracted softmax.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    ensure_finite(scores, "softmax input")?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Gradient of the loss w.r.t. the softmax input, given the softmax output
/// `y` and the gradient `dy` w.r.t. that output.
pub fn softmax_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let inner: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(yi, gi)| yi * (gi - inner)).collect()
}

/// Binary cross-entropy of one prediction and its derivative w.r.t. `pred`.
pub fn cross_entropy(pred: f64, label: bool) -> (f64, f64) {
    let p = pred.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        (-p.ln(), -1.0 / p)
    } else {
        (-(1.0 - p).ln(), 1.0 / (1.0 - p))
    }
}

pub fn mean_cross_entropy(batch: &[(f64, bool)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(|&(p, y)| cross_entropy(p, y).0).sum::<f64>() / batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn elementwise_cases() {
        assert_eq!(elementwise(Elementwise::Mul, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
        assert_eq!(elementwise(Elementwise::Sub, &[1.5, -2.0], &[1.5, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            elementwise(Elementwise::Concat, &[1.0], &[2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(elementwise(Elementwise::Mul, &[1.0], &[1.0, 2.0]).is_err());
        assert!(elementwise(Elementwise::Sub, &[1.0], &[]).is_err());
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(softmax(&[-3.7]).unwrap(), vec![1.0]);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[f64::NAN]).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        assert!((cross_entropy(0.5, true).0 - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy(1.0 - PROB_EPS, true).0 < 1.1e-7);
        // -(ln 0.9 + ln 0.9) / 2
        let mean = mean_cross_entropy(&[(0.9, true), (0.1, false)]);
        assert!((mean - 0.105_360_515_657_826_3).abs() < 1e-12, "{mean}");
        assert!(cross_entropy(0.0, true).0.is_finite());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_permutation_equivariant(
            xs in proptest::collection::vec(-50.0f64..50.0, 1..12),
            rot in 0usize..12,
        ) {
            let y = softmax(&xs).unwrap();
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            let k = rot % xs.len();
            let mut perm = xs.clone();
            perm.rotate_left(k);
            let mut expect = y.clone();
            expect.rotate_left(k);
            let got = softmax(&perm).unwrap();
            for (a, b) in got.iter().zip(&expect) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn loss_is_nonnegative(p in 0.0f64..=1.0, label: bool) {
            prop_assert!(cross_entropy(p, label).0 >= 0.0);
        }
    }
}
