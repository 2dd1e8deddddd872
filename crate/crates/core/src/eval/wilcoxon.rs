use serde::Serialize;
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Fewest nonzero differences for which the normal approximation is used.
pub const MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedRankTest {
    /// Nonzero differences kept.
    pub n: usize,
    /// Rank sum of positive differences (`a > b`).
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Two-sided Wilcoxon signed-rank test on paired samples, normal
/// approximation with tie-corrected variance and no continuity correction.
/// Zero differences are dropped; tied magnitudes get average ranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignedRankTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired differences".into()));
    }
    let n = d.len();
    if n < MIN_PAIRS {
        return Err(Error::invalid(format!("{n} nonzero differences, need at least {MIN_PAIRS}")));
    }
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let (mut w_plus, mut w_minus, mut tie_term) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let rank = (i + j + 2) as f64 / 2.0;
        for v in &d[i..=j] {
            if *v > 0.0 {
                w_plus += rank;
            } else {
                w_minus += rank;
            }
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = if var > 0.0 { (w_plus - mean) / var.sqrt() } else { 0.0 };
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(SignedRankTest { n, w_plus, w_minus, statistic: w_plus.min(w_minus), z, p_value })
}
