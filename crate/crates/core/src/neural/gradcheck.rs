use super::{Gradients, ParamSet};

/// Gradients smaller than this are compared on an absolute scale of this size.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;


#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name (or `input`) and element index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

fn report(entries: impl Iterator<Item = (String, usize, f64)>, tol: f64) -> GradCheckReport {
    let mut checked = 0;
    let mut max = 0.0;
    let mut worst = None;
    for (name, idx, err) in entries {
        checked += 1;
        if err > max || err.is_nan() {
            max = if err.is_nan() { f64::INFINITY } else { err };
            worst = Some((name, idx));
        }
    }
    GradCheckReport { checked, max_rel_error: max, worst, tolerance: tol, passed: max < tol }
}

/// Compares the analytic gradients returned by `f` with central differences
/// of step `h` for every element of every trainable parameter.
pub fn grad_check<F>(params: &ParamSet, f: F, h: f64, tol: f64) -> GradCheckReport
where
    F: Fn(&ParamSet) -> (f64, Gradients),
{
    let (_, analytic) = f(params);
    let mut work = params.clone();
    let mut errs = Vec::new();
    let names: Vec<(String, bool, usize)> = params
        .iter()
        .map(|p| (p.name.clone(), p.trainable, p.data.len()))
        .collect();
    for (name, trainable, len) in names {
        if !trainable {
            continue;
        }
        let id = work.id(&name).expect("parameter present");
        for k in 0..len {
            let orig = work.get(id)[k];
            work.get_mut(id)[k] = orig + h;
            let plus = f(&work).0;
            work.get_mut(id)[k] = orig - h;
            let minus = f(&work).0;
            work.get_mut(id)[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            errs.push((name.clone(), k, rel_error(analytic.get(id)[k], numeric)));
        }
    }
    report(errs.into_iter(), tol)
}

/// Trainable coordinates where the central differences at `h` and `h / 2`
/// disagree: the loss is not differentiable within `h` of the point there, so
/// a finite-difference comparison is meaningless. Uses only `f`'s loss.
pub fn kinked_coordinates<F>(params: &ParamSet, f: F, h: f64) -> Vec<(String, usize)>
where
    F: Fn(&ParamSet) -> f64,
{
    let mut work = params.clone();
    let mut out = Vec::new();
    let names: Vec<(String, bool, usize)> = params.iter().map(|p| (p.name.clone(), p.trainable, p.data.len())).collect();
    for (name, trainable, len) in names {
        if !trainable {
            continue;
        }
        let id = work.id(&name).expect("parameter present");
        for k in 0..len {
            let orig = work.get(id)[k];
            let mut central = |step: f64| {
                work.get_mut(id)[k] = orig + step;
                let plus = f(&work);
                work.get_mut(id)[k] = orig - step;
                let minus = f(&work);
                work.get_mut(id)[k] = orig;
                (plus - minus) / (2.0 * step)
            };
            let (wide, narrow) = (central(h), central(h / 2.0));
            if rel_error(wide, narrow) > KINK_TOLERANCE {
                out.push((name.clone(), k));
            }
        }
    }
    out
}

/// Disagreement between the two step sizes that marks a kink. Smooth losses
/// agree to roughly `h^2`, far below this.
pub const KINK_TOLERANCE: f64 = 1e-5;

/// Same check with respect to an input vector; `f` returns the loss and its
/// gradient w.r.t. `x`.
pub fn grad_check_inputs<F>(x: &[f64], f: F, h: f64, tol: f64) -> GradCheckReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x);
    let mut work = x.to_vec();
    let errs: Vec<_> = (0..x.len())
        .map(|k| {
            let orig = work[k];
            work[k] = orig + h;
            let plus = f(&work).0;
            work[k] = orig - h;
            let minus = f(&work).0;
            work[k] = orig;
            ("input".to_string(), k, rel_error(analytic[k], (plus - minus) / (2.0 * h)))
        })
        .collect();
    report(errs.into_iter(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{cross_entropy, softmax, softmax_backward};
    use rand::Rng;

    #[test]
    fn softmax_cross_entropy_fragment() {
        for seed in 0..20u64 {
            let mut rng = crate::seed::rng(seed);
            let n = rng.gen_range(2..6);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let label = rng.gen_bool(0.5);
            let target = rng.gen_range(0..n);
            let f = |x: &[f64]| {
                let y = softmax(x).unwrap();
                let (loss, dp) = cross_entropy(y[target], label);
                let mut dy = vec![0.0; n];
                dy[target] = dp;
                (loss, softmax_backward(&y, &dy))
            };
            let r = grad_check_inputs(&x, f, 1e-5, 1e-4);
            assert!(r.passed, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn kinks_are_detected_only_near_the_kink() {
        let mut p = ParamSet::new();
        let id = p.add("w", &[3], vec![3e-6, 0.5, -7e-6]).unwrap();
        let leaky = |p: &ParamSet| p.get(id).iter().map(|&w| if w > 0.0 { w } else { 0.25 * w }).sum::<f64>();
        let found = kinked_coordinates(&p, leaky, 1e-5);
        assert_eq!(found, vec![("w".to_string(), 0), ("w".to_string(), 2)]);
        let smooth = |p: &ParamSet| p.get(id).iter().map(|w| w.sin() * w).sum::<f64>();
        assert!(kinked_coordinates(&p, smooth, 1e-5).is_empty());
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let mut p = ParamSet::new();
        let id = p.add("w", &[3], vec![0.5, -1.0, 2.0]).unwrap();
        let r = grad_check(
            &p,
            |p| {
                let w = p.get(id);
                let loss: f64 = w.iter().map(|v| v * v).sum();
                let mut g = p.zero_grads();
                for (gi, wi) in g.get_mut(id).iter_mut().zip(w) {
                    *gi = 3.0 * wi; // should be 2w
                }
                (loss, g)
            },
            1e-5,
            1e-4,
        );
        assert!(!r.passed);
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.checked, 3);
    }
}
