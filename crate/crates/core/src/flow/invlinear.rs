use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::{sigmoid, softplus, softplus_inv};
use crate::rng::Rng;

/// Floor on `|u_ii|`, keeping the LU factorisation invertible.
pub const MIN_DIAG: f64 = 1e-6;

/// Invertible linear mixing of the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvLinearLayer {
    /// `y_i = x_{perm[i]}`.
    Permutation { perm: Vec<usize> },
    Lu(LuLinear),
}

/// `W = P L U` with unit-lower `L`, upper `U`, and
/// `u_ii = sign_i * (softplus(rho_i) + MIN_DIAG)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuLinear {
    pub perm: Vec<usize>,
    /// Full `D x D` row-major; only entries below the diagonal are used.
    pub lower: Vec<f64>,
    /// Full `D x D` row-major; only entries above the diagonal are used.
    pub upper: Vec<f64>,
    pub diag_raw: Vec<f64>,
    pub diag_sign: Vec<f64>,
}

fn random_perm(dim: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..dim).collect();
    p.shuffle(rng);
    p
}

impl InvLinearLayer {
    pub fn permutation(perm: Vec<usize>) -> Self {
        InvLinearLayer::Permutation { perm }
    }

    pub fn random_permutation(dim: usize, rng: &mut Rng) -> Self {
        InvLinearLayer::Permutation { perm: random_perm(dim, rng) }
    }

    /// Random permutation with `L`, `U` perturbed by `noise`; `noise = 0`
    /// gives a pure permutation with unit diagonal.
    pub fn lu_random(dim: usize, noise: f64, rng: &mut Rng) -> Self {
        let perm = random_perm(dim, rng);
        let mut lower = vec![0.0; dim * dim];
        let mut upper = vec![0.0; dim * dim];
        let mut diag_raw = vec![softplus_inv(1.0 - MIN_DIAG); dim];
        if noise > 0.0 {
            for i in 0..dim {
                for j in 0..dim {
                    let v = noise * rng.sample::<f64, _>(StandardNormal);
                    if i > j {
                        lower[i * dim + j] = v;
                    } else if i < j {
                        upper[i * dim + j] = v;
                    }
                }
                diag_raw[i] += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let diag_sign = (0..dim).map(|_| if noise > 0.0 && rng.random::<bool>() { -1.0 } else { 1.0 }).collect();
        InvLinearLayer::Lu(LuLinear { perm, lower, upper, diag_raw, diag_sign })
    }

    pub fn dim(&self) -> usize {
        match self {
            InvLinearLayer::Permutation { perm } => perm.len(),
            InvLinearLayer::Lu(lu) => lu.perm.len(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        match self {
            InvLinearLayer::Permutation { perm } => (perm.iter().map(|&p| x[p]).collect(), 0.0),
            InvLinearLayer::Lu(lu) => lu.forward(x),
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        match self {
            InvLinearLayer::Permutation { perm } => {
                let mut x = vec![0.0; y.len()];
                for (i, &p) in perm.iter().enumerate() {
                    x[p] = y[i];
                }
                x
            }
            InvLinearLayer::Lu(lu) => lu.inverse(y),
        }
    }

    pub fn backward(&self, x: &[f64], g_out: &[f64], g_logdet: f64, grad: Option<&mut [f64]>) -> Vec<f64> {
        match self {
            InvLinearLayer::Permutation { perm } => {
                let mut g = vec![0.0; g_out.len()];
                for (i, &p) in perm.iter().enumerate() {
                    g[p] += g_out[i];
                }
                g
            }
            InvLinearLayer::Lu(lu) => lu.backward(x, g_out, g_logdet, grad),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            InvLinearLayer::Permutation { .. } => 0,
            InvLinearLayer::Lu(lu) => {
                let d = lu.perm.len();
                d * (d - 1) + d
            }
        }
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        if let InvLinearLayer::Lu(lu) = self {
            let d = lu.perm.len();
            for i in 0..d {
                for j in 0..i {
                    out.push(lu.lower[i * d + j]);
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    out.push(lu.upper[i * d + j]);
                }
            }
            out.extend_from_slice(&lu.diag_raw);
        }
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let InvLinearLayer::Lu(lu) = self else { return 0 };
        let d = lu.perm.len();
        let mut k = 0;
        for i in 0..d {
            for j in 0..i {
                lu.lower[i * d + j] = src[k];
                k += 1;
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                lu.upper[i * d + j] = src[k];
                k += 1;
            }
        }
        lu.diag_raw.copy_from_slice(&src[k..k + d]);
        k + d
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        if let InvLinearLayer::Lu(lu) = self {
            let d = lu.perm.len();
            for i in 0..d {
                for j in 0..i {
                    out.push(format!("{prefix}.lower[{i},{j}]"));
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    out.push(format!("{prefix}.upper[{i},{j}]"));
                }
            }
            out.extend((0..d).map(|i| format!("{prefix}.diag_raw[{i}]")));
        }
    }

    pub fn is_valid(&self) -> bool {
        let perm = match self {
            InvLinearLayer::Permutation { perm } => perm,
            InvLinearLayer::Lu(lu) => &lu.perm,
        };
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        match self {
            InvLinearLayer::Permutation { .. } => true,
            InvLinearLayer::Lu(lu) => (0..lu.perm.len()).all(|i| lu.diag(i).abs() >= MIN_DIAG),
        }
    }
}

impl LuLinear {
    fn magnitude(&self, i: usize) -> f64 {
        softplus(self.diag_raw[i]) + MIN_DIAG
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag_sign[i] * self.magnitude(i)
    }

    fn mul_u(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| self.diag(i) * x[i] + (i + 1..d).map(|j| self.upper[i * d + j] * x[j]).sum::<f64>())
            .collect()
    }

    fn mul_l(&self, u: &[f64]) -> Vec<f64> {
        let d = u.len();
        (0..d).map(|i| u[i] + (0..i).map(|j| self.lower[i * d + j] * u[j]).sum::<f64>()).collect()
    }

    fn logdet(&self) -> f64 {
        (0..self.perm.len()).map(|i| self.magnitude(i).ln()).sum()
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let l = self.mul_l(&self.mul_u(x));
        (self.perm.iter().map(|&p| l[p]).collect(), self.logdet())
    }

    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len();
        let mut l = vec![0.0; d];
        for (i, &p) in self.perm.iter().enumerate() {
            l[p] = y[i];
        }
        let mut u = vec![0.0; d];
        for i in 0..d {
            u[i] = l[i] - (0..i).map(|j| self.lower[i * d + j] * u[j]).sum::<f64>();
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| self.upper[i * d + j] * x[j]).sum();
            x[i] = (u[i] - s) / self.diag(i);
        }
        x
    }

    fn backward(&self, x: &[f64], g_out: &[f64], g_logdet: f64, grad: Option<&mut [f64]>) -> Vec<f64> {
        let d = x.len();
        let u = self.mul_u(x);
        let mut g_l = vec![0.0; d];
        for (i, &p) in self.perm.iter().enumerate() {
            g_l[p] = g_out[i];
        }
        let mut g_u = g_l.clone();
        for i in 0..d {
            for j in 0..i {
                g_u[j] += self.lower[i * d + j] * g_l[i];
            }
        }
        let mut g_x = vec![0.0; d];
        for j in 0..d {
            g_x[j] = self.diag(j) * g_u[j] + (0..j).map(|i| self.upper[i * d + j] * g_u[i]).sum::<f64>();
        }
        if let Some(grad) = grad {
            let mut k = 0;
            for i in 0..d {
                for j in 0..i {
                    grad[k] += g_l[i] * u[j];
                    k += 1;
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    grad[k] += g_u[i] * x[j];
                    k += 1;
                }
            }
            for i in 0..d {
                let dm = sigmoid(self.diag_raw[i]);
                grad[k + i] += (g_u[i] * x[i] * self.diag_sign[i] + g_logdet / self.magnitude(i)) * dm;
            }
        }
        g_x
    }
}
