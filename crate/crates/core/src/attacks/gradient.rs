use super::{finish, judge, posterior, AttackConfig, AttackResult};
use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::math::dist2;
use crate::training::{Adam, DetectionThreshold};

/// Change of variables that keeps iterates inside the box: `x = lo + (hi - lo)(tanh w + 1)/2`.
struct TanhBox<'a> {
    bounds: Option<(&'a [f64], &'a [f64])>,
}

const EDGE: f64 = 1.0 - 1e-9;

impl TanhBox<'_> {
    fn to_w(&self, x: &[f64]) -> Vec<f64> {
        match self.bounds {
            None => x.to_vec(),
            Some((lo, hi)) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| if h > l { (2.0 * (v - l) / (h - l) - 1.0).clamp(-EDGE, EDGE).atanh() } else { 0.0 })
                .collect(),
        }
    }

    fn to_x(&self, w: &[f64]) -> Vec<f64> {
        match self.bounds {
            None => w.to_vec(),
            Some((lo, hi)) => w.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| l + (h - l) * 0.5 * (v.tanh() + 1.0)).collect(),
        }
    }

    /// Multiplies an x-space gradient by `dx/dw` in place.
    fn chain(&self, w: &[f64], g: &mut [f64]) {
        if let Some((lo, hi)) = self.bounds {
            for (((gi, wi), l), h) in g.iter_mut().zip(w).zip(lo).zip(hi) {
                let t = wi.tanh();
                *gi *= (h - l) * 0.5 * (1.0 - t * t);
            }
        }
    }
}

/// Untargeted margin attack on the per-class logits `log p(x|y) + log p(y)`.
///
/// Minimizes `|x' - x|^2 + c max(z_true - max_{j != true} z_j, -kappa)`, plus
/// `c max(0, -log p(x') - T)` when `config.detect_aware`, with Adam in tanh
/// space and a geometric bisection over `c`. Returns the closest successful
/// iterate seen, or `x` itself when none succeeded.
pub fn gradient_attack(model: &FlowModel, x: &[f64], y_true: usize, threshold: &DetectionThreshold, config: &AttackConfig) -> Result<AttackResult> {
    config.validate(model.dim)?;
    let start = judge(model, threshold, x)?;
    if start.predicted != y_true || start.detected {
        return Err(Error::InvalidInitialization("attack seed must be correctly classified and below the threshold".into()));
    }
    let bounds = match (&config.lower, &config.upper) {
        (Some(l), Some(h)) => Some((l.as_slice(), h.as_slice())),
        _ => None,
    };
    let space = TanhBox { bounds };
    let classes = model.classes;
    let log_py = model.log_class_probs();

    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = f64::INFINITY;
    let (mut lo, mut hi) = (config.c_min, config.c_max);
    let mut c = (lo * hi).sqrt();
    let mut queries = 1;
    let mut iterations = 0;
    let mut trace = Vec::new();

    for _ in 0..config.binary_steps {
        let mut w = space.to_w(x);
        let mut adam = Adam::new(w.len(), 0.9, 0.999, 1e-8);
        let mut found = false;
        for _ in 0..config.iterations {
            let xp = space.to_x(&w);
            let Ok(eval) = model.evaluate(&xp) else { break };
            queries += 1;
            iterations += 1;
            let logits: Vec<f64> = eval.class_ll.iter().zip(&log_py).map(|(a, b)| a + b).collect();
            let (runner_up, z_runner) = logits
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != y_true)
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            let margin = logits[y_true] - z_runner;
            let nll = -crate::math::logsumexp(&logits);
            let detected = threshold.is_outlier_nll(nll);
            let predicted = crate::math::argmax(&logits);
            if predicted != y_true && !(config.detect_aware && detected) {
                found = true;
                let d = dist2(x, &xp);
                if d < best_norm {
                    best_norm = d;
                    best = Some(xp.clone());
                }
            }

            let mut weights = vec![0.0; classes];
            if margin > -config.kappa && runner_up != usize::MAX {
                weights[y_true] += c;
                weights[runner_up] -= c;
            }
            if config.detect_aware && detected {
                for (wc, p) in weights.iter_mut().zip(posterior(model, &eval.class_ll)) {
                    *wc -= c * p;
                }
            }
            let mut g = model.backward(&eval.pass, &weights, None);
            for ((gi, a), b) in g.iter_mut().zip(&xp).zip(x) {
                *gi += 2.0 * (a - b);
            }
            space.chain(&w, &mut g);
            if g.iter().any(|v| !v.is_finite()) {
                break;
            }
            adam.step(&mut w, &g, config.step_size);
        }
        trace.push(best_norm);
        if found {
            hi = c;
        } else {
            lo = c;
        }
        c = (lo * hi).sqrt();
    }
    let x_adv = best.unwrap_or_else(|| x.to_vec());
    finish(model, threshold, x, y_true, x_adv, config, iterations, queries, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowModel;
    use crate::priors::{GmmPrior, Prior};

    /// Zero-layer flow with unit-variance class means at `(-1, 0)` and `(1, 0)`;
    /// the log-likelihood difference is `2 x_0`, so the boundary is `x_0 = 0`.
    fn linear_model() -> FlowModel {
        let prior = Prior::Gmm(GmmPrior { means: vec![vec![-1.0, 0.0], vec![1.0, 0.0]], log_stds: vec![vec![0.0; 2]; 2] });
        FlowModel::from_parts(2, vec![], prior, 0).unwrap()
    }

    fn lax_threshold() -> DetectionThreshold {
        DetectionThreshold { value: 1e9, quantile: 0.5, calibration_set: "none".into(), calibration_size: 1 }
    }

    #[test]
    fn reaches_the_projection_distance() {
        let model = linear_model();
        let x = [-0.8, 0.5];
        let res = gradient_attack(&model, &x, 0, &lax_threshold(), &AttackConfig::default()).unwrap();
        assert!(res.success);
        assert!((res.norm - 0.8).abs() < 0.05 * 0.8, "{}", res.norm);
        assert!((res.x_adv[1] - 0.5).abs() < 0.05);
    }

    #[test]
    fn zero_iterations_return_the_input() {
        let model = linear_model();
        let x = [-0.8, 0.5];
        let cfg = AttackConfig { iterations: 0, c_min: 1e-9, c_max: 1e-9, ..Default::default() };
        let res = gradient_attack(&model, &x, 0, &lax_threshold(), &cfg).unwrap();
        assert_eq!(res.x_adv, x.to_vec());
        assert!(!res.success && res.norm == 0.0);
    }

    #[test]
    fn respects_the_box() {
        let model = linear_model();
        let x = [-0.8, 0.5];
        let cfg = AttackConfig::default().with_bounds(vec![-2.0, 0.4], vec![2.0, 0.6]);
        let res = gradient_attack(&model, &x, 0, &lax_threshold(), &cfg).unwrap();
        assert!(res.success && cfg.in_box(&res.x_adv));
    }

    #[test]
    fn rejects_misclassified_seed() {
        let model = linear_model();
        assert!(matches!(
            gradient_attack(&model, &[0.5, 0.0], 0, &lax_threshold(), &AttackConfig::default()),
            Err(Error::InvalidInitialization(_))
        ));
    }

    #[test]
    fn detect_aware_success_is_undetected() {
        let model = linear_model();
        let x = [-0.8, 0.0];
        let nll = judge(&model, &lax_threshold(), &x).unwrap().nll;
        let thr = DetectionThreshold { value: nll + 0.5, ..lax_threshold() };
        let cfg = AttackConfig { detect_aware: true, ..Default::default() };
        let res = gradient_attack(&model, &x, 0, &thr, &cfg).unwrap();
        if res.success {
            let v = judge(&model, &thr, &res.x_adv).unwrap();
            assert_eq!(res.detected, v.nll > thr.value);
            assert!(!res.detected);
        }
    }
}
