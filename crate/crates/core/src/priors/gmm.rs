use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::LN_2PI;
use crate::rng::Rng;

/// One diagonal Gaussian per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmPrior {
    pub means: Vec<Vec<f64>>,
    pub log_stds: Vec<Vec<f64>>,
}

impl GmmPrior {
    pub fn new(means: Vec<Vec<f64>>, log_stds: Vec<Vec<f64>>) -> Self {
        assert_eq!(means.len(), log_stds.len());
        assert!(means.iter().zip(&log_stds).all(|(m, s)| m.len() == s.len()));
        Self { means, log_stds }
    }

    /// Unit-variance components with `mu_y = radius * e_{y mod D}`.
    pub fn anchored(classes: usize, dim: usize, radius: f64) -> Self {
        let means = (0..classes)
            .map(|c| {
                let mut m = vec![0.0; dim];
                if radius != 0.0 {
                    m[c % dim] = radius;
                }
                m
            })
            .collect();
        Self::new(means, vec![vec![0.0; dim]; classes])
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn logprob(&self, z: &[f64], y: usize) -> f64 {
        crate::math::diag_normal_logpdf(z, &self.means[y], &self.log_stds[y])
    }

    /// Adds `weight * d logprob` to `grad_z` and to `grad` (this prior's slice).
    pub fn logprob_grad(&self, z: &[f64], y: usize, weight: f64, grad_z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.dim();
        let c = self.classes();
        let (mu, ls) = (&self.means[y], &self.log_stds[y]);
        let mut lp = 0.0;
        let mut grad = grad;
        for j in 0..d {
            let inv = (-ls[j]).exp();
            let u = (z[j] - mu[j]) * inv;
            lp += -0.5 * LN_2PI - ls[j] - 0.5 * u * u;
            grad_z[j] -= weight * u * inv;
            if let Some(g) = grad.as_deref_mut() {
                g[y * d + j] += weight * u * inv;
                g[c * d + y * d + j] += weight * (u * u - 1.0);
            }
        }
        lp
    }

    pub fn sample(&self, y: usize, rng: &mut Rng) -> Vec<f64> {
        self.means[y]
            .iter()
            .zip(&self.log_stds[y])
            .map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        2 * self.classes() * self.dim()
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        self.means.iter().for_each(|m| out.extend_from_slice(m));
        self.log_stds.iter().for_each(|s| out.extend_from_slice(s));
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let d = self.dim();
        let mut k = 0;
        for m in self.means.iter_mut().chain(self.log_stds.iter_mut()) {
            m.copy_from_slice(&src[k..k + d]);
            k += d;
        }
        k
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for (name, rows) in [("mean", &self.means), ("log_std", &self.log_stds)] {
            for (c, row) in rows.iter().enumerate() {
                out.extend((0..row.len()).map(|j| format!("{prefix}.{name}[{c},{j}]")));
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.means.iter().chain(&self.log_stds).flatten().all(|v| v.is_finite())
    }
}
