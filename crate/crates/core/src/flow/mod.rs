//! Bijective flow layers and the conditional flow model.
//!
//! A [`FlowModel`] maps data `x` to a latent `z = f_N(...f_1(x))` and scores
//! `log p(x | y) = log p(z | y) + sum_i log |det J_i|`. Every layer provides an
//! exact inverse and a reverse pass, so parameter and input gradients are
//! computed analytically.

mod actnorm;
mod coupling;
mod invlinear;
pub mod mlp;

pub use actnorm::ActNormLayer;
pub use coupling::{half_partition, CouplingLayer};
pub use invlinear::{InvLinearLayer, LuLinear, MIN_DIAG};
pub use mlp::{Activation, MlpNet};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::logsumexp;
use crate::priors::{GmmPrior, Prior, RobustFamily, RobustPrior, SmoothedPrior, SplitPrior};
use crate::rng::{seeded, Rng};

pub const MODEL_SCHEMA: &str = "condflow.model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    ActNorm(ActNormLayer),
    Coupling(CouplingLayer),
    InvLinear(InvLinearLayer),
}

impl Layer {
    pub fn dim(&self) -> usize {
        match self {
            Layer::ActNorm(l) => l.dim(),
            Layer::Coupling(l) => l.dim(),
            Layer::InvLinear(l) => l.dim(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        match self {
            Layer::ActNorm(l) => l.forward(x),
            Layer::Coupling(l) => l.forward(x),
            Layer::InvLinear(l) => l.forward(x),
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Layer::ActNorm(l) => l.inverse(y),
            Layer::Coupling(l) => l.inverse(y),
            Layer::InvLinear(l) => l.inverse(y),
        }
    }

    /// Reverse pass given the layer input `x`, the gradient w.r.t. the layer
    /// output and the weight on this layer's log-determinant.
    pub fn backward(&self, x: &[f64], g_out: &[f64], g_logdet: f64, grad: Option<&mut [f64]>) -> Vec<f64> {
        match self {
            Layer::ActNorm(l) => l.backward(x, g_out, g_logdet, grad),
            Layer::Coupling(l) => l.backward(x, g_out, g_logdet, grad),
            Layer::InvLinear(l) => l.backward(x, g_out, g_logdet, grad),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::ActNorm(l) => l.param_count(),
            Layer::Coupling(l) => l.net.param_count(),
            Layer::InvLinear(l) => l.param_count(),
        }
    }

    fn params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::ActNorm(l) => l.params(out),
            Layer::Coupling(l) => l.net.params(out),
            Layer::InvLinear(l) => l.params(out),
        }
    }

    fn set_params(&mut self, src: &[f64]) -> usize {
        match self {
            Layer::ActNorm(l) => l.set_params(src),
            Layer::Coupling(l) => l.net.set_params(src),
            Layer::InvLinear(l) => l.set_params(src),
        }
    }

    fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        match self {
            Layer::ActNorm(l) => l.param_names(&format!("{prefix}.actnorm"), out),
            Layer::Coupling(l) => l.net.param_names(&format!("{prefix}.coupling.net"), out),
            Layer::InvLinear(l) => l.param_names(&format!("{prefix}.invlinear"), out),
        }
    }

    fn is_valid(&self, dim: usize) -> bool {
        self.dim() == dim
            && match self {
                Layer::ActNorm(l) => l.log_scale.iter().chain(&l.bias).all(|v| v.is_finite()),
                Layer::Coupling(l) => l.is_partition() && l.net.is_consistent() && l.scale_clamp > 0.0,
                Layer::InvLinear(l) => l.is_valid(),
            }
    }
}

/// Output of [`FlowModel::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub z: Vec<f64>,
    pub logdet: f64,
    /// `inputs[i]` is the input of layer `i` (so `inputs[0] = x`).
    pub inputs: Vec<Vec<f64>>,
    pub layer_logdets: Vec<f64>,
}

/// Per-class log-likelihoods of one input together with its forward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub pass: ForwardPass,
    /// `log p(x | y)` for every class.
    pub class_ll: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub dim: usize,
    pub classes: usize,
    pub layers: Vec<Layer>,
    pub prior: Prior,
    /// Class prior `p(y)`.
    pub class_probs: Vec<f64>,
    /// Seed the model was constructed with.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    None,
    Permutation,
    Lu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorConfig {
    /// Unit-variance Gaussians at `radius * e_y`.
    Gmm { radius: f64 },
    Split { anchor_scale: f64, hidden: Vec<usize> },
    Laplace { radius: f64 },
    Cauchy { radius: f64 },
    GaussLaplace { radius: f64, gauss_weight: f64 },
    Smoothed { radius: f64, smoothing: f64 },
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Gmm { radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub dim: usize,
    pub classes: usize,
    pub blocks: usize,
    pub hidden: Vec<usize>,
    pub mixing: Mixing,
    pub actnorm: bool,
    pub scale_clamp: f64,
    pub prior: PriorConfig,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            classes: 2,
            blocks: 4,
            hidden: vec![32, 32],
            mixing: Mixing::Lu,
            actnorm: true,
            scale_clamp: 2.0,
            prior: PriorConfig::default(),
            seed: 0,
        }
    }
}

impl PriorConfig {
    pub fn build(&self, classes: usize, dim: usize, rng: &mut Rng) -> Result<Prior> {
        let anchored = |radius: f64| GmmPrior::anchored(classes, dim, radius);
        Ok(match self {
            PriorConfig::Gmm { radius } => Prior::Gmm(anchored(*radius)),
            PriorConfig::Split { anchor_scale, hidden } => {
                if classes >= dim {
                    return Err(invalid(format!("split prior needs dim > classes (dim {dim}, classes {classes})")));
                }
                Prior::Split(SplitPrior::new(classes, dim, classes, *anchor_scale, hidden, rng))
            }
            PriorConfig::Laplace { radius } => {
                let g = anchored(*radius);
                Prior::Robust(RobustPrior::new(RobustFamily::Laplace, g.means, g.log_stds))
            }
            PriorConfig::Cauchy { radius } => {
                let g = anchored(*radius);
                Prior::Robust(RobustPrior::new(RobustFamily::Cauchy, g.means, g.log_stds))
            }
            PriorConfig::GaussLaplace { radius, gauss_weight } => {
                if !(0.0..=1.0).contains(gauss_weight) {
                    return Err(invalid("mixture weight must lie in [0, 1]"));
                }
                let g = anchored(*radius);
                Prior::Robust(RobustPrior::new(RobustFamily::GaussLaplace { gauss_weight: *gauss_weight }, g.means, g.log_stds))
            }
            PriorConfig::Smoothed { radius, smoothing } => {
                if !(0.0..1.0).contains(smoothing) || classes < 2 {
                    return Err(invalid("smoothing mass must lie in [0, 1) with at least two classes"));
                }
                Prior::Smoothed(SmoothedPrior::new(anchored(*radius), *smoothing))
            }
        })
    }
}

impl FlowModel {
    /// Assembles a model from explicit parts with a uniform class prior.
    pub fn from_parts(dim: usize, layers: Vec<Layer>, prior: Prior, seed: u64) -> Result<Self> {
        let classes = prior.classes();
        let model = Self { dim, classes, layers, prior, class_probs: vec![1.0 / classes as f64; classes], seed };
        model.validate()?;
        Ok(model)
    }

    /// Builds `blocks` steps of `[actnorm] -> [mixing] -> coupling`; couplings
    /// start at the identity and alternate which half they transform.
    pub fn new(config: &FlowConfig) -> Result<Self> {
        if config.dim == 0 || config.classes == 0 {
            return Err(invalid("dimension and class count must be positive"));
        }
        if !(config.scale_clamp > 0.0) {
            return Err(invalid("scale clamp must be positive"));
        }
        let mut rng = seeded(config.seed);
        let d = config.dim;
        let mut layers = Vec::new();
        for b in 0..config.blocks {
            if config.actnorm {
                layers.push(Layer::ActNorm(ActNormLayer::new(d)));
            }
            if d >= 2 {
                match config.mixing {
                    Mixing::None => {}
                    Mixing::Permutation => layers.push(Layer::InvLinear(InvLinearLayer::random_permutation(d, &mut rng))),
                    Mixing::Lu => layers.push(Layer::InvLinear(InvLinearLayer::lu_random(d, 0.0, &mut rng))),
                }
                let (cond, tr) = half_partition(d, b % 2 == 1);
                layers.push(Layer::Coupling(CouplingLayer::new(cond, tr, &config.hidden, config.scale_clamp, 0.0, &mut rng)));
            }
        }
        let prior = config.prior.build(config.classes, d, &mut rng)?;
        Self::from_parts(d, layers, prior, config.seed)
    }

    /// A model with random (non-identity) couplings and mixing, for tests and
    /// demos; actnorm layers are marked initialised with random parameters.
    pub fn random(config: &FlowConfig, strength: f64) -> Result<Self> {
        use rand::Rng as _;
        let mut model = Self::new(config)?;
        let mut rng = seeded(config.seed ^ 0x5eed);
        for layer in &mut model.layers {
            match layer {
                Layer::ActNorm(a) => {
                    for j in 0..a.dim() {
                        a.log_scale[j] = strength * (rng.random::<f64>() - 0.5);
                        a.bias[j] = strength * (rng.random::<f64>() - 0.5);
                    }
                    a.initialized = true;
                }
                Layer::Coupling(c) => {
                    c.net = MlpNet::new(&c.net.widths, strength, &mut rng);
                }
                Layer::InvLinear(l @ InvLinearLayer::Lu(_)) => {
                    *l = InvLinearLayer::lu_random(l.dim(), 0.5 * strength, &mut rng);
                }
                Layer::InvLinear(_) => {}
            }
        }
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prior.dim() != self.dim || self.prior.classes() != self.classes {
            return Err(invalid("prior dimensions do not match the model"));
        }
        if let Some(i) = self.layers.iter().position(|l| !l.is_valid(self.dim)) {
            return Err(invalid(format!("layer {i} is inconsistent")));
        }
        if !self.prior.is_valid() {
            return Err(invalid("prior parameters are invalid"));
        }
        let total: f64 = self.class_probs.iter().sum();
        if self.class_probs.len() != self.classes
            || (total - 1.0).abs() > 1e-12
            || self.class_probs.iter().any(|&p| !(p >= 0.0))
        {
            return Err(invalid("class probabilities must form a simplex vector"));
        }
        Ok(())
    }

    pub fn is_initialized(&self) -> bool {
        self.layers.iter().all(|l| !matches!(l, Layer::ActNorm(a) if !a.initialized))
    }

    /// Data-dependent initialisation of every uninitialised actnorm layer,
    /// using the activations of `batch` at that depth.
    pub fn initialize(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        let mut acts: Vec<Vec<f64>> = batch.to_vec();
        for i in 0..self.layers.len() {
            if let Layer::ActNorm(a) = &mut self.layers[i] {
                if !a.initialized {
                    a.initialize(&acts)?;
                }
            }
            let layer = &self.layers[i];
            for v in acts.iter_mut() {
                *v = layer.forward(v).0;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("input contains non-finite values"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut layer_logdets = Vec::with_capacity(self.layers.len());
        let mut z = x.to_vec();
        let mut logdet = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            let (next, ld) = layer.forward(&z);
            if !ld.is_finite() || next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalOverflow { layer: i });
            }
            inputs.push(std::mem::replace(&mut z, next));
            layer_logdets.push(ld);
            logdet += ld;
        }
        Ok(ForwardPass { z, logdet, inputs, layer_logdets })
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        let mut x = z.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            x = layer.inverse(&x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalOverflow { layer: i });
            }
        }
        Ok(x)
    }

    /// `log p(x | y)` in nats.
    pub fn log_likelihood(&self, x: &[f64], y: usize) -> Result<f64> {
        if y >= self.classes {
            return Err(Error::InvalidClass { class: y, classes: self.classes });
        }
        let pass = self.forward(x)?;
        Ok(self.prior.logprob(&pass.z, y)? + pass.logdet)
    }

    /// Forward pass plus `log p(x | y)` for every class.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let pass = self.forward(x)?;
        let class_ll =
            (0..self.classes).map(|y| Ok(self.prior.logprob(&pass.z, y)? + pass.logdet)).collect::<Result<Vec<_>>>()?;
        Ok(Evaluation { pass, class_ll })
    }

    pub fn class_log_likelihoods(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x)?.class_ll)
    }

    pub fn log_class_probs(&self) -> Vec<f64> {
        self.class_probs.iter().map(|p| p.ln()).collect()
    }

    /// `log p(x) = log sum_y p(x | y) p(y)`.
    pub fn log_marginal(&self, x: &[f64]) -> Result<f64> {
        let ll = self.class_log_likelihoods(x)?;
        Ok(marginal_from_class_ll(&ll, &self.log_class_probs()))
    }

    /// Reverse pass for an objective that is a function of the per-class
    /// log-likelihoods: `class_weights[c]` is its derivative w.r.t.
    /// `log p(x | c)`. Returns the input gradient and accumulates parameter
    /// gradients (laid out like [`FlowModel::params`]) when `grad` is given.
    pub fn backward(&self, pass: &ForwardPass, class_weights: &[f64], mut grad: Option<&mut [f64]>) -> Vec<f64> {
        let layer_params = self.layer_param_total();
        let mut g = vec![0.0; self.dim];
        let mut g_logdet = 0.0;
        for (c, &w) in class_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            g_logdet += w;
            let prior_grad = grad.as_deref_mut().map(|gr| &mut gr[layer_params..]);
            self.prior.logprob_grad(&pass.z, c, w, &mut g, prior_grad);
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let slice = grad.as_deref_mut().map(|gr| &mut gr[offsets[i]..offsets[i] + layer.param_count()]);
            g = layer.backward(&pass.inputs[i], &g, g_logdet, slice);
        }
        g
    }

    /// Evaluates the per-class log-likelihoods at `x` and returns the gradient
    /// of the scalar whose class weights `weights_fn` derives from them.
    pub fn input_gradient<F>(&self, x: &[f64], weights_fn: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        let eval = self.evaluate(x)?;
        let w = weights_fn(&eval.class_ll);
        let g = self.backward(&eval.pass, &w, None);
        Ok((eval.class_ll, g))
    }

    fn layer_param_total(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_total() + self.prior.param_count()
    }

    /// All trainable parameters: layers in order, then the prior.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            l.params(&mut out);
        }
        self.prior.params(&mut out);
        out
    }

    pub fn set_params(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.param_count(), "parameter vector length mismatch");
        let mut off = 0;
        for l in &mut self.layers {
            off += l.set_params(&src[off..]);
        }
        self.prior.set_params(&src[off..]);
    }

    /// Human-readable path of every parameter, aligned with [`FlowModel::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.param_count());
        for (i, l) in self.layers.iter().enumerate() {
            l.param_names(&format!("layer{i}"), &mut out);
        }
        self.prior.param_names("prior", &mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct File<'a> {
            schema: &'a str,
            model: &'a FlowModel,
        }
        Ok(serde_json::to_string_pretty(&File { schema: MODEL_SCHEMA, model: self })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            schema: String,
            model: FlowModel,
        }
        let file: File = serde_json::from_str(text)?;
        if file.schema != MODEL_SCHEMA {
            return Err(Error::Parse(format!("unsupported model schema {:?}", file.schema)));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn marginal_from_class_ll(class_ll: &[f64], log_py: &[f64]) -> f64 {
    let joint: Vec<f64> = class_ll.iter().zip(log_py).map(|(a, b)| a + b).collect();
    logsumexp(&joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn standard_gmm(classes: usize, dim: usize) -> Prior {
        Prior::Gmm(GmmPrior::anchored(classes, dim, 0.0))
    }

    #[test]
    fn empty_model_is_identity() {
        let model = FlowModel::from_parts(2, vec![], standard_gmm(2, 2), 0).unwrap();
        let pass = model.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(pass.z, vec![1.0, 2.0]);
        assert_eq!(pass.logdet, 0.0);
        assert_eq!(model.inverse(&[0.5, -0.5]).unwrap(), vec![0.5, -0.5]);
        for y in 0..2 {
            assert!((model.log_likelihood(&[0.0, 0.0], y).unwrap() + (2.0 * PI).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_net_coupling_is_identity() {
        let mut rng = seeded(0);
        let (a, b) = half_partition(4, false);
        let c = CouplingLayer::new(a, b, &[8], 2.0, 0.0, &mut rng);
        let model = FlowModel::from_parts(4, vec![Layer::Coupling(c)], standard_gmm(2, 4), 0).unwrap();
        let x = [0.3, -1.0, 2.5, 4.0];
        let pass = model.forward(&x).unwrap();
        assert_eq!(pass.z, x.to_vec());
        assert_eq!(pass.logdet, 0.0);
    }

    #[test]
    fn constant_scale_two_coupling_logdet() {
        let mut rng = seeded(0);
        let (a, b) = half_partition(6, false);
        let clamp = 2.0;
        let mut c = CouplingLayer::new(a, b, &[4], clamp, 0.0, &mut rng);
        // zero output weights; raw bias chosen so clamp * tanh(raw) = ln 2
        let raw = (LN_2 / clamp).atanh();
        let last = c.net.biases.len() - 1;
        for k in 0..3 {
            c.net.biases[last][k] = raw;
        }
        let model = FlowModel::from_parts(6, vec![Layer::Coupling(c)], standard_gmm(2, 6), 0).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let pass = model.forward(&x).unwrap();
        assert!((pass.logdet - 3.0 * LN_2).abs() < 1e-12);
        assert!((pass.logdet - 2.0794).abs() < 1e-4);
        for j in 3..6 {
            assert!((pass.z[j] - 2.0 * x[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn actnorm_change_of_variables() {
        let layer = ActNormLayer::with_params(vec![LN_2], vec![0.0]);
        let model = FlowModel::from_parts(1, vec![Layer::ActNorm(layer)], standard_gmm(1, 1), 0).unwrap();
        let expected = -0.5 * (2.0 * PI).ln() + LN_2;
        assert!((model.log_likelihood(&[0.0], 0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn invalid_class_is_rejected() {
        let model = FlowModel::from_parts(2, vec![], standard_gmm(2, 2), 0).unwrap();
        assert!(matches!(model.log_likelihood(&[0.0, 0.0], 2), Err(Error::InvalidClass { class: 2, classes: 2 })));
    }

    #[test]
    fn overflow_reports_layer_index() {
        let big = ActNormLayer::with_params(vec![700.0, 700.0], vec![0.0, 0.0]);
        let model = FlowModel::from_parts(
            2,
            vec![Layer::InvLinear(InvLinearLayer::permutation(vec![1, 0])), Layer::ActNorm(big.clone()), Layer::ActNorm(big)],
            standard_gmm(2, 2),
            0,
        )
        .unwrap();
        match model.forward(&[1.0, 1.0]) {
            Err(Error::NumericalOverflow { layer }) => assert_eq!(layer, 2),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn model_file_round_trip() {
        let cfg = FlowConfig { dim: 4, classes: 3, blocks: 2, hidden: vec![6], seed: 9, ..FlowConfig::default() };
        let model = FlowModel::random(&cfg, 0.5).unwrap();
        let text = model.to_json().unwrap();
        assert!(text.contains(MODEL_SCHEMA));
        let back = FlowModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        let bad = text.replace(MODEL_SCHEMA, "condflow.model/999");
        assert!(FlowModel::from_json(&bad).is_err());
    }

    #[test]
    fn initialize_standardizes_first_layer() {
        let cfg = FlowConfig { dim: 3, classes: 2, blocks: 2, hidden: vec![4], seed: 1, ..FlowConfig::default() };
        let mut model = FlowModel::new(&cfg).unwrap();
        assert!(!model.is_initialized());
        let mut rng = seeded(4);
        use rand::Rng as _;
        let batch: Vec<Vec<f64>> =
            (0..64).map(|_| (0..3).map(|j| 3.0 + (j as f64 + 1.0) * (rng.random::<f64>() - 0.5)).collect()).collect();
        model.initialize(&batch).unwrap();
        assert!(model.is_initialized());
        let Layer::ActNorm(first) = &model.layers[0] else { panic!() };
        let outs: Vec<Vec<f64>> = batch.iter().map(|x| first.forward(x).0).collect();
        for j in 0..3 {
            let col: Vec<f64> = outs.iter().map(|v| v[j]).collect();
            assert!(crate::math::mean(&col).abs() < 1e-8);
            assert!((crate::math::variance(&col) - 1.0).abs() < 1e-8);
        }
    }
}
