//! Objectives, optimisation, Bayes-rule classification and likelihood-based
//! outlier detection.

mod optim;

pub use optim::{clip_global_norm, Adam};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Sample};
use crate::error::{invalid, Error, Result};
use crate::flow::FlowModel;
use crate::math::{argmax, logsumexp, softmax};
use crate::rng::seeded;

/// Examples per reduction chunk; fixed so the summation order does not
/// depend on the number of worker threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `-log p(x, y)`.
    JointNll,
    /// `-log p(x | y) / D - w * log p(y | x)`.
    Reweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Weight on `-log p(y | x)`; only used by [`ObjectiveKind::Reweighted`].
    pub class_weight: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::reweighted()
    }
}

impl ObjectiveSpec {
    pub fn joint_nll() -> Self {
        Self { kind: ObjectiveKind::JointNll, class_weight: 0.0 }
    }

    pub fn reweighted() -> Self {
        Self { kind: ObjectiveKind::Reweighted, class_weight: 1.0 }
    }

    /// Per-example loss and its derivative w.r.t. each `log p(x | c)`.
    pub fn example(&self, class_ll: &[f64], log_py: &[f64], y: usize, dim: usize) -> (f64, Vec<f64>) {
        let c = class_ll.len();
        let mut w = vec![0.0; c];
        match self.kind {
            ObjectiveKind::JointNll => {
                w[y] = -1.0;
                (-(class_ll[y] + log_py[y]), w)
            }
            ObjectiveKind::Reweighted => {
                let joint: Vec<f64> = class_ll.iter().zip(log_py).map(|(a, b)| a + b).collect();
                let post = softmax(&joint);
                let log_post_y = joint[y] - logsumexp(&joint);
                let d = dim as f64;
                for k in 0..c {
                    let ind = if k == y { 1.0 } else { 0.0 };
                    w[k] = -self.class_weight * (ind - post[k]);
                }
                w[y] -= 1.0 / d;
                (-class_ll[y] / d - self.class_weight * log_post_y, w)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.class_weight >= 0.0) {
            return Err(invalid("classification weight must be non-negative"));
        }
        Ok(())
    }
}

/// Mean batch objective and its gradient w.r.t. every model parameter.
pub fn parameter_gradients(model: &FlowModel, batch: &[Sample], objective: &ObjectiveSpec) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    objective.validate()?;
    let n_params = model.param_count();
    let log_py = model.log_class_probs();
    let chunk_sum = |chunk: &[Sample]| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; n_params];
        let mut loss = 0.0;
        for s in chunk {
            if s.y >= model.classes {
                return Err(Error::InvalidClass { class: s.y, classes: model.classes });
            }
            let eval = model.evaluate(&s.x)?;
            let (l, w) = objective.example(&eval.class_ll, &log_py, s.y, model.dim);
            loss += l;
            model.backward(&eval.pass, &w, Some(&mut grad));
        }
        Ok((loss, grad))
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<Result<(f64, Vec<f64>)>> = {
        use rayon::prelude::*;
        batch.par_chunks(CHUNK).map(chunk_sum).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<(f64, Vec<f64>)>> = batch.chunks(CHUNK).map(chunk_sum).collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for p in partials {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = batch.len() as f64;
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { path: model.param_names().swap_remove(i) });
    }
    Ok((loss, grad))
}

/// Batch means of `-log p(x, y)` split into `-log p(x)` and `-log p(y | x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NllDecomposition {
    pub total: f64,
    pub generative: f64,
    pub discriminative: f64,
}

/// Per-example likelihood summary used by several diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleScores {
    pub class_ll: Vec<f64>,
    /// `log p(x)`.
    pub log_marginal: f64,
    pub posterior: Vec<f64>,
}

impl ExampleScores {
    pub fn nll(&self) -> f64 {
        -self.log_marginal
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.posterior)
    }
}

pub fn score(model: &FlowModel, x: &[f64]) -> Result<ExampleScores> {
    let class_ll = model.class_log_likelihoods(x)?;
    let joint: Vec<f64> = class_ll.iter().zip(model.log_class_probs()).map(|(a, b)| a + b).collect();
    let log_marginal = logsumexp(&joint);
    let posterior = softmax(&joint);
    Ok(ExampleScores { class_ll, log_marginal, posterior })
}

/// Scores every sample, in order.
pub fn score_all(model: &FlowModel, samples: &[Sample]) -> Result<Vec<ExampleScores>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples.par_iter().map(|s| score(model, &s.x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        samples.iter().map(|s| score(model, &s.x)).collect()
    }
}

pub fn joint_nll(model: &FlowModel, batch: &[Sample]) -> Result<NllDecomposition> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let scores = score_all(model, batch)?;
    let log_py = model.log_class_probs();
    let n = batch.len() as f64;
    let (mut total, mut generative, mut discriminative) = (0.0, 0.0, 0.0);
    for (s, sc) in batch.iter().zip(&scores) {
        let joint = sc.class_ll[s.y] + log_py[s.y];
        total -= joint;
        generative -= sc.log_marginal;
        discriminative -= joint - sc.log_marginal;
    }
    Ok(NllDecomposition { total: total / n, generative: generative / n, discriminative: discriminative / n })
}

pub fn reweighted_loss(model: &FlowModel, batch: &[Sample]) -> Result<f64> {
    mean_objective(model, batch, &ObjectiveSpec::reweighted())
}

pub fn mean_objective(model: &FlowModel, batch: &[Sample], objective: &ObjectiveSpec) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let scores = score_all(model, batch)?;
    let log_py = model.log_class_probs();
    let total: f64 =
        batch.iter().zip(&scores).map(|(s, sc)| objective.example(&sc.class_ll, &log_py, s.y, model.dim).0).sum();
    Ok(total / batch.len() as f64)
}

/// Bayes-rule posterior over classes.
pub fn classify(model: &FlowModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(score(model, x)?.posterior)
}

pub fn accuracy(model: &FlowModel, samples: &[Sample]) -> Result<f64> {
    let scores = score_all(model, samples)?;
    let correct = samples.iter().zip(&scores).filter(|(s, sc)| sc.predicted() == s.y).count();
    Ok(correct as f64 / samples.len() as f64)
}

/// Top-class margin (in `log` base `base`) that guarantees posterior at
/// least `1 - delta` under a uniform class prior: `log C + log((1 - delta) / delta)`.
pub fn required_logit_gap(classes: usize, delta: f64, base: f64) -> Result<f64> {
    if classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("confidence slack {delta} must lie in (0, 1)")));
    }
    if !(base > 0.0 && base != 1.0) {
        return Err(invalid("logarithm base must be positive and not 1"));
    }
    Ok(((classes as f64).ln() + ((1.0 - delta) / delta).ln()) / base.ln())
}

pub fn bits_per_dim(mean_nll_nats: f64, dim: usize) -> f64 {
    mean_nll_nats / (dim as f64 * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            decay_factor: 0.1,
            decay_every: 60,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.decay_every == 0 {
            return Err(invalid("batch size and decay interval must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(invalid("learning rate must be >= 0 and decay factor in (0, 1]"));
        }
        if !(self.clip_norm > 0.0) || !(self.adam_eps > 0.0) {
            return Err(invalid("clip norm and Adam epsilon must be positive"));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 0 is the state before the first update.
    pub epoch: usize,
    pub loss: f64,
    pub generative_term: f64,
    pub discriminative_term: f64,
    pub accuracy: f64,
    pub bits_per_dim: f64,
}

pub const METRICS_HEADER: &str = "epoch,loss,generative_term,discriminative_term,accuracy,bits_per_dim";

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch, m.loss, m.generative_term, m.discriminative_term, m.accuracy, m.bits_per_dim
        );
    }
    out
}

pub fn evaluate_metrics(model: &FlowModel, samples: &[Sample], objective: &ObjectiveSpec, epoch: usize) -> Result<EpochMetrics> {
    let scores = score_all(model, samples)?;
    let log_py = model.log_class_probs();
    let n = samples.len() as f64;
    let (mut loss, mut gen, mut disc, mut correct) = (0.0, 0.0, 0.0, 0usize);
    for (s, sc) in samples.iter().zip(&scores) {
        loss += objective.example(&sc.class_ll, &log_py, s.y, model.dim).0;
        let joint = sc.class_ll[s.y] + log_py[s.y];
        gen -= sc.log_marginal;
        disc -= joint - sc.log_marginal;
        correct += usize::from(sc.predicted() == s.y);
    }
    Ok(EpochMetrics {
        epoch,
        loss: loss / n,
        generative_term: gen / n,
        discriminative_term: disc / n,
        accuracy: correct as f64 / n,
        bits_per_dim: bits_per_dim(gen / n, model.dim),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FlowModel,
    pub metrics: Vec<EpochMetrics>,
}

/// Minibatch Adam on the training split (or all samples when the dataset has
/// no split). Deterministic for a given seed.
pub fn train(mut model: FlowModel, dataset: &Dataset, objective: &ObjectiveSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    objective.validate()?;
    if dataset.dim != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: dataset.dim });
    }
    if dataset.classes > model.classes {
        return Err(invalid("dataset has more classes than the model"));
    }
    let train_set = dataset.train_samples();
    if train_set.is_empty() {
        return Err(invalid("empty training set"));
    }
    if !model.is_initialized() {
        let init: Vec<Vec<f64>> = train_set.iter().take(512).map(|s| s.x.clone()).collect();
        model.initialize(&init)?;
    }
    let diverged = |epoch: usize, step: usize| move |e: Error| if e.is_numerical() { Error::Divergence { epoch, step } } else { e };

    let mut metrics = vec![evaluate_metrics(&model, &train_set, objective, 0).map_err(diverged(0, 0))?];
    let mut rng = seeded(config.seed);
    let mut adam = Adam::new(model.param_count(), config.beta1, config.beta2, config.adam_eps);
    let mut params = model.params();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        let lr = config.learning_rate_at(epoch - 1);
        order.shuffle(&mut rng);
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Sample> = idx.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, mut grad) = parameter_gradients(&model, &batch, objective).map_err(diverged(epoch, step))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step });
            }
            clip_global_norm(&mut grad, config.clip_norm);
            if lr > 0.0 {
                adam.step(&mut params, &grad, lr);
                model.set_params(&params);
            }
        }
        let m = evaluate_metrics(&model, &train_set, objective, epoch).map_err(diverged(epoch, 0))?;
        if !m.loss.is_finite() {
            return Err(Error::Divergence { epoch, step: 0 });
        }
        metrics.push(m);
    }
    Ok(TrainOutcome { model, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionThreshold {
    /// Threshold on `-log p(x)` in nats.
    pub value: f64,
    pub quantile: f64,
    pub calibration_set: String,
    pub calibration_size: usize,
}

/// `T` = the `ceil(q n)`-th smallest calibration NLL.
pub fn calibrate_threshold(model: &FlowModel, samples: &[Sample], quantile: f64, set_id: &str) -> Result<DetectionThreshold> {
    if samples.is_empty() {
        return Err(invalid("empty calibration set"));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(invalid(format!("quantile {quantile} must lie in (0, 1)")));
    }
    let mut nll: Vec<f64> = score_all(model, samples)?.iter().map(ExampleScores::nll).collect();
    Ok(DetectionThreshold {
        value: order_statistic_threshold(&mut nll, quantile),
        quantile,
        calibration_set: set_id.to_string(),
        calibration_size: samples.len(),
    })
}

pub fn order_statistic_threshold(values: &mut [f64], quantile: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = ((quantile * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[k - 1]
}

impl DetectionThreshold {
    pub fn is_outlier_nll(&self, nll: f64) -> bool {
        nll > self.value
    }
}

/// `-log p(x) > T`.
pub fn detect_outlier(model: &FlowModel, x: &[f64], threshold: &DetectionThreshold) -> Result<bool> {
    Ok(threshold.is_outlier_nll(-model.log_marginal(x)?))
}

/// Per-example `log p(x | y_true)` and the best wrong-class `log p(x | y)`.
pub fn wrong_class_gaps(model: &FlowModel, samples: &[Sample]) -> Result<Vec<(f64, f64)>> {
    let scores = score_all(model, samples)?;
    Ok(samples
        .iter()
        .zip(&scores)
        .map(|(s, sc)| {
            let wrong = sc
                .class_ll
                .iter()
                .enumerate()
                .filter(|(c, _)| *c != s.y)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            (sc.class_ll[s.y], wrong)
        })
        .collect())
}
