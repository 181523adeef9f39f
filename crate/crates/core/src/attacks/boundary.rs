use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{finish, judge, AttackConfig, AttackResult};
use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::math::{dist2, dot, norm2};
use crate::rng::seeded;
use crate::training::DetectionThreshold;

const LINE_SEARCH_STEPS: usize = 20;
const ADAPT_EVERY: usize = 10;
const STEP_FACTOR: f64 = 1.5;
const MIN_STEP: f64 = 1e-9;

/// Decision-based attack from `init` toward `x_original`.
///
/// With `config.detect_aware` the decision has `C + 1` outcomes, "detected"
/// being the extra one, and a candidate counts as adversarial only when that
/// decision equals `y_target`. Otherwise any class other than `y_true` counts.
/// Accepted distances never increase.
pub fn boundary_attack(
    model: &FlowModel,
    x_original: &[f64],
    y_true: usize,
    y_target: usize,
    init: &[f64],
    threshold: &DetectionThreshold,
    config: &AttackConfig,
) -> Result<AttackResult> {
    config.validate(model.dim)?;
    if init.len() != x_original.len() {
        return Err(Error::DimensionMismatch { expected: x_original.len(), got: init.len() });
    }
    if init == x_original {
        return Err(Error::InvalidInitialization("starting point equals the original input".into()));
    }
    let queries = std::cell::Cell::new(0usize);
    let is_adv = |x: &[f64]| -> bool {
        queries.set(queries.get() + 1);
        match judge(model, threshold, x) {
            Ok(v) if config.detect_aware => !v.detected && v.predicted == y_target,
            Ok(v) => v.predicted != y_true,
            Err(_) => false,
        }
    };
    if !is_adv(init) {
        let what = if config.detect_aware { "classified as the target class and below the threshold" } else { "misclassified" };
        return Err(Error::InvalidInitialization(format!("starting point must be {what}")));
    }

    // Pull the start toward the original along the connecting line.
    let along = |a: f64| -> Vec<f64> { x_original.iter().zip(init).map(|(o, i)| o + a * (i - o)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..LINE_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if is_adv(&along(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x_adv = along(hi);
    let mut dist = dist2(&x_adv, x_original);
    let mut trace = vec![dist];

    let mut rng = seeded(config.seed);
    let (mut spherical, mut source) = (config.spherical_step, config.source_step);
    let (mut orth_trials, mut orth_ok, mut src_trials, mut src_ok) = (0usize, 0usize, 0usize, 0usize);
    let mut iterations = 0;
    let dim = x_original.len();
    while queries.get() + 2 <= config.max_queries && dist > MIN_STEP {
        iterations += 1;
        let diff: Vec<f64> = x_adv.iter().zip(x_original).map(|(a, o)| a - o).collect();
        let unit: Vec<f64> = diff.iter().map(|v| v / dist).collect();
        let mut eta: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let along_unit = dot(&eta, &unit);
        eta.iter_mut().zip(&unit).for_each(|(e, u)| *e -= along_unit * u);
        let en = norm2(&eta);
        if en > 0.0 {
            eta.iter_mut().for_each(|e| *e *= spherical * dist / en);
        }
        // step on the sphere of radius `dist` around the original
        let moved: Vec<f64> = diff.iter().zip(&eta).map(|(d, e)| d + e).collect();
        let mn = norm2(&moved);
        let mut sph: Vec<f64> = x_original.iter().zip(&moved).map(|(o, m)| o + m * dist / mn).collect();
        config.clip(&mut sph);
        orth_trials += 1;
        if is_adv(&sph) {
            orth_ok += 1;
            let mut cand: Vec<f64> = sph.iter().zip(x_original).map(|(s, o)| s + source * (o - s)).collect();
            config.clip(&mut cand);
            src_trials += 1;
            let d = dist2(&cand, x_original);
            if d < dist && is_adv(&cand) {
                src_ok += 1;
                x_adv = cand;
                dist = d;
                if config.keep_trace {
                    trace.push(dist);
                }
            }
        }
        if orth_trials == ADAPT_EVERY {
            if orth_ok * 2 > orth_trials {
                spherical *= STEP_FACTOR;
            } else {
                spherical /= STEP_FACTOR;
            }
            if src_trials > 0 {
                if src_ok * 4 > src_trials {
                    source = (source * STEP_FACTOR).min(0.5);
                } else {
                    source /= STEP_FACTOR;
                }
            }
            spherical = spherical.min(1.0);
            (orth_trials, orth_ok, src_trials, src_ok) = (0, 0, 0, 0);
            if spherical < MIN_STEP && source < MIN_STEP {
                break;
            }
        }
    }
    if !config.keep_trace {
        trace.push(dist);
    }
    finish(model, threshold, x_original, y_true, x_adv, config, iterations, queries.get(), trace)
}
