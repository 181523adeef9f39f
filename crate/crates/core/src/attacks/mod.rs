//! Worst-case evaluation: a margin attack with an optional detection penalty
//! and a decision-based boundary attack whose decision has an extra
//! "detected" class.

mod boundary;
mod gradient;
mod suite;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::flow::FlowModel;
use crate::math::{argmax, dist2, logsumexp, softmax};
use crate::training::DetectionThreshold;

pub use boundary::boundary_attack;
pub use gradient::gradient_attack;
pub use suite::{eligible_indices, evaluate_attack_suite, suite_csv, AttackKind, SuiteRow, ATTACK_TABLE_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// L2 budget used when reporting success.
    pub budget: f64,
    pub detect_aware: bool,
    /// Margin constant of the gradient attack.
    pub kappa: f64,
    pub binary_steps: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub iterations: usize,
    pub step_size: f64,
    /// Model evaluations allowed to the boundary attack.
    pub max_queries: usize,
    /// Initial orthogonal step, relative to the current distance.
    pub spherical_step: f64,
    /// Initial contraction step, relative to the current distance.
    pub source_step: f64,
    /// Per-dimension box; `None` leaves inputs unconstrained.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub seed: u64,
    pub keep_trace: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: 1.5,
            detect_aware: false,
            kappa: 0.0,
            binary_steps: 6,
            c_min: 1e-3,
            c_max: 1e3,
            iterations: 200,
            step_size: 1e-2,
            max_queries: 2000,
            spherical_step: 0.05,
            source_step: 0.05,
            lower: None,
            upper: None,
            seed: 0,
            keep_trace: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.budget >= 0.0) || !(self.kappa >= 0.0) {
            return Err(invalid("budget and kappa must be non-negative"));
        }
        if !(self.c_min > 0.0 && self.c_max >= self.c_min) || !(self.step_size > 0.0) {
            return Err(invalid("need 0 < c_min <= c_max and a positive step size"));
        }
        if !(self.spherical_step > 0.0) || !(self.source_step > 0.0 && self.source_step < 1.0) {
            return Err(invalid("boundary steps must be positive and the source step below 1"));
        }
        match (&self.lower, &self.upper) {
            (None, None) => Ok(()),
            (Some(lo), Some(hi)) if lo.len() == dim && hi.len() == dim && lo.iter().zip(hi).all(|(a, b)| a <= b) => Ok(()),
            _ => Err(invalid("box bounds must both be given, match the dimension and satisfy lower <= upper")),
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub(crate) fn clip(&self, x: &mut [f64]) {
        if let (Some(lo), Some(hi)) = (&self.lower, &self.upper) {
            for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *h);
            }
        }
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => x.iter().zip(lo).zip(hi).all(|((v, l), h)| *l <= *v && *v <= *h),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub x_adv: Vec<f64>,
    /// The model's argmax at `x_adv` differs from the true class.
    pub success: bool,
    /// `-log p(x_adv) > T`.
    pub detected: bool,
    /// `|x_adv - x|`, recomputed from the returned point.
    pub norm: f64,
    pub within_budget: bool,
    pub iterations: usize,
    /// Model evaluations spent.
    pub queries: usize,
    /// Accepted distances (boundary attack) or best distance per `c` step.
    pub trace: Vec<f64>,
}

impl AttackResult {
    pub fn undetected_success(&self) -> bool {
        self.within_budget && !self.detected
    }
}

/// What the model says about one input.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub predicted: usize,
    pub nll: f64,
    pub detected: bool,
}

pub fn judge(model: &FlowModel, threshold: &DetectionThreshold, x: &[f64]) -> Result<Verdict> {
    let class_ll = model.class_log_likelihoods(x)?;
    let joint: Vec<f64> = class_ll.iter().zip(model.log_class_probs()).map(|(a, b)| a + b).collect();
    let nll = -logsumexp(&joint);
    Ok(Verdict { predicted: argmax(&joint), detected: threshold.is_outlier_nll(nll), nll })
}

/// Posterior from per-class log-likelihoods under the model's class prior.
pub(crate) fn posterior(model: &FlowModel, class_ll: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = class_ll.iter().zip(model.log_class_probs()).map(|(a, b)| a + b).collect();
    softmax(&joint)
}

/// Re-evaluates every flag on the returned point.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    model: &FlowModel,
    threshold: &DetectionThreshold,
    x: &[f64],
    y_true: usize,
    x_adv: Vec<f64>,
    config: &AttackConfig,
    iterations: usize,
    queries: usize,
    trace: Vec<f64>,
) -> Result<AttackResult> {
    let v = judge(model, threshold, &x_adv)?;
    let norm = dist2(x, &x_adv);
    let success = v.predicted != y_true;
    Ok(AttackResult {
        success,
        detected: v.detected,
        norm,
        within_budget: success && norm <= config.budget,
        iterations,
        queries: queries + 1,
        trace,
        x_adv,
    })
}
