use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gmm::GmmPrior;
use crate::math::logsumexp;
use crate::rng::Rng;

/// Label-smoothed mixture: the latent cluster equals the label with
/// probability `1 - smoothing`, and is uniform over the other labels
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedPrior {
    pub base: GmmPrior,
    pub smoothing: f64,
}

impl SmoothedPrior {
    pub fn new(base: GmmPrior, smoothing: f64) -> Self {
        assert!((0.0..1.0).contains(&smoothing), "smoothing mass must lie in [0, 1)");
        assert!(base.classes() >= 2);
        Self { base, smoothing }
    }

    fn log_weights(&self, y: usize) -> Vec<f64> {
        let c = self.base.classes();
        let off = (self.smoothing / (c - 1) as f64).ln();
        (0..c).map(|k| if k == y { (1.0 - self.smoothing).ln() } else { off }).collect()
    }

    pub fn logprob(&self, z: &[f64], y: usize) -> f64 {
        let terms: Vec<f64> =
            self.log_weights(y).iter().enumerate().map(|(k, w)| w + self.base.logprob(z, k)).collect();
        logsumexp(&terms)
    }

    pub fn logprob_grad(&self, z: &[f64], y: usize, weight: f64, grad_z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let lw = self.log_weights(y);
        let terms: Vec<f64> = lw.iter().enumerate().map(|(k, w)| w + self.base.logprob(z, k)).collect();
        let lp = logsumexp(&terms);
        let mut grad = grad;
        for (k, t) in terms.iter().enumerate() {
            let r = (t - lp).exp();
            if r > 0.0 {
                self.base.logprob_grad(z, k, weight * r, grad_z, grad.as_deref_mut());
            }
        }
        lp
    }

    pub fn sample(&self, y: usize, rng: &mut Rng) -> Vec<f64> {
        let c = self.base.classes();
        let cluster = if rng.random::<f64>() < self.smoothing {
            let k = rng.random_range(0..c - 1);
            if k >= y {
                k + 1
            } else {
                k
            }
        } else {
            y
        };
        self.base.sample(cluster, rng)
    }
}
