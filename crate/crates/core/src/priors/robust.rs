use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::{logsumexp, sign0, LN_2PI};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RobustFamily {
    Laplace,
    Cauchy,
    /// `w * N(mu, b^2) + (1 - w) * Laplace(mu, b)` over the whole vector,
    /// sharing location and scale.
    GaussLaplace { gauss_weight: f64 },
}

/// Heavier-tailed class-conditional priors with diagonal structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustPrior {
    pub family: RobustFamily,
    pub locs: Vec<Vec<f64>>,
    pub log_scales: Vec<Vec<f64>>,
}

impl RobustPrior {
    pub fn new(family: RobustFamily, locs: Vec<Vec<f64>>, log_scales: Vec<Vec<f64>>) -> Self {
        assert_eq!(locs.len(), log_scales.len());
        Self { family, locs, log_scales }
    }

    pub fn classes(&self) -> usize {
        self.locs.len()
    }

    pub fn dim(&self) -> usize {
        self.locs[0].len()
    }

    /// Whether samples have a finite mean (false for Cauchy).
    pub fn has_mean(&self) -> bool {
        !matches!(self.family, RobustFamily::Cauchy)
    }

    pub fn logprob(&self, z: &[f64], y: usize) -> f64 {
        let mut gz = vec![0.0; z.len()];
        self.logprob_grad(z, y, 0.0, &mut gz, None)
    }

    fn laplace(&self, z: &[f64], y: usize, weight: f64, gz: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let (d, c) = (self.dim(), self.classes());
        let mut grad = grad;
        let mut lp = 0.0;
        for j in 0..d {
            let inv = (-self.log_scales[y][j]).exp();
            let r = z[j] - self.locs[y][j];
            let s = sign0(r);
            lp += -std::f64::consts::LN_2 - self.log_scales[y][j] - r.abs() * inv;
            gz[j] -= weight * s * inv;
            if let Some(g) = grad.as_deref_mut() {
                g[y * d + j] += weight * s * inv;
                g[c * d + y * d + j] += weight * (r.abs() * inv - 1.0);
            }
        }
        lp
    }

    fn gauss(&self, z: &[f64], y: usize, weight: f64, gz: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let (d, c) = (self.dim(), self.classes());
        let mut grad = grad;
        let mut lp = 0.0;
        for j in 0..d {
            let inv = (-self.log_scales[y][j]).exp();
            let u = (z[j] - self.locs[y][j]) * inv;
            lp += -0.5 * LN_2PI - self.log_scales[y][j] - 0.5 * u * u;
            gz[j] -= weight * u * inv;
            if let Some(g) = grad.as_deref_mut() {
                g[y * d + j] += weight * u * inv;
                g[c * d + y * d + j] += weight * (u * u - 1.0);
            }
        }
        lp
    }

    fn cauchy(&self, z: &[f64], y: usize, weight: f64, gz: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let (d, c) = (self.dim(), self.classes());
        let mut grad = grad;
        let mut lp = 0.0;
        for j in 0..d {
            let inv = (-self.log_scales[y][j]).exp();
            let u = (z[j] - self.locs[y][j]) * inv;
            let q = 1.0 + u * u;
            lp += -PI.ln() - self.log_scales[y][j] - q.ln();
            let du = -2.0 * u / q;
            gz[j] += weight * du * inv;
            if let Some(g) = grad.as_deref_mut() {
                g[y * d + j] -= weight * du * inv;
                g[c * d + y * d + j] += weight * (2.0 * u * u / q - 1.0);
            }
        }
        lp
    }

    pub fn logprob_grad(&self, z: &[f64], y: usize, weight: f64, grad_z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        match self.family {
            RobustFamily::Laplace => self.laplace(z, y, weight, grad_z, grad),
            RobustFamily::Cauchy => self.cauchy(z, y, weight, grad_z, grad),
            RobustFamily::GaussLaplace { gauss_weight } => {
                let mut scratch = vec![0.0; z.len()];
                let lg = self.gauss(z, y, 0.0, &mut scratch, None);
                let ll = self.laplace(z, y, 0.0, &mut scratch, None);
                let terms = [gauss_weight.ln() + lg, (1.0 - gauss_weight).ln() + ll];
                let lp = logsumexp(&terms);
                let r = (terms[0] - lp).exp();
                let mut grad = grad;
                if r > 0.0 {
                    self.gauss(z, y, weight * r, grad_z, grad.as_deref_mut());
                }
                if r < 1.0 {
                    self.laplace(z, y, weight * (1.0 - r), grad_z, grad);
                }
                lp
            }
        }
    }

    pub fn sample(&self, y: usize, rng: &mut Rng) -> Vec<f64> {
        let family = match self.family {
            RobustFamily::GaussLaplace { gauss_weight } => {
                if rng.random::<f64>() < gauss_weight {
                    None
                } else {
                    Some(RobustFamily::Laplace)
                }
            }
            f => Some(f),
        };
        self.locs[y]
            .iter()
            .zip(&self.log_scales[y])
            .map(|(&m, &ls)| {
                let b = ls.exp();
                match family {
                    None => m + b * rng.sample::<f64, _>(StandardNormal),
                    Some(RobustFamily::Laplace) => {
                        let u: f64 = rng.random::<f64>() - 0.5;
                        m - b * sign0(u) * (1.0 - 2.0 * u.abs()).ln()
                    }
                    Some(RobustFamily::Cauchy) => m + b * (PI * (rng.random::<f64>() - 0.5)).tan(),
                    Some(RobustFamily::GaussLaplace { .. }) => unreachable!(),
                }
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        2 * self.classes() * self.dim()
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        self.locs.iter().chain(&self.log_scales).for_each(|r| out.extend_from_slice(r));
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let d = self.dim();
        let mut k = 0;
        for r in self.locs.iter_mut().chain(self.log_scales.iter_mut()) {
            r.copy_from_slice(&src[k..k + d]);
            k += d;
        }
        k
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for (name, rows) in [("loc", &self.locs), ("log_scale", &self.log_scales)] {
            for (c, row) in rows.iter().enumerate() {
                out.extend((0..row.len()).map(|j| format!("{prefix}.{name}[{c},{j}]")));
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        let weight_ok = match self.family {
            RobustFamily::GaussLaplace { gauss_weight } => (0.0..=1.0).contains(&gauss_weight),
            _ => true,
        };
        weight_ok && self.locs.iter().chain(&self.log_scales).flatten().all(|v| v.is_finite())
    }
}
