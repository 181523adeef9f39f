use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::flow::mlp::MlpNet;
use crate::math::LN_2PI;
use crate::rng::Rng;

/// Soft bound on the head's log-std output.
const LOG_STD_BOUND: f64 = 5.0;

/// `p(z_s, z_n | y) = N(z_s; m e_y, sigma_s^2 I) * N(z_n; mu(z_s, y), diag(sigma(z_s, y))^2)`.
///
/// The first `split_dim` latent coordinates carry the class; the remaining
/// ones are modelled by a conditional Gaussian whose parameters come from
/// an MLP of `(z_s, one_hot(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPrior {
    pub classes: usize,
    pub split_dim: usize,
    pub anchor_scale: f64,
    /// Log of the shared standard deviation of `z_s`.
    pub log_scale: f64,
    pub head: MlpNet,
}

/// Splits `z` into `(z[..split_dim], z[split_dim..])`; requires `0 < split_dim < len`.
pub fn split_partition(z: &[f64], split_dim: usize) -> crate::Result<(Vec<f64>, Vec<f64>)> {
    if split_dim == 0 || split_dim >= z.len() {
        return Err(crate::Error::InvalidArgument(format!(
            "split dimension {split_dim} out of range for a {}-dimensional latent",
            z.len()
        )));
    }
    Ok((z[..split_dim].to_vec(), z[split_dim..].to_vec()))
}

impl SplitPrior {
    /// The head starts at zero output, i.e. `z_n ~ N(0, I)`.
    pub fn new(classes: usize, dim: usize, split_dim: usize, anchor_scale: f64, hidden: &[usize], rng: &mut Rng) -> Self {
        assert!(split_dim >= classes, "split dimension must hold one anchor per class");
        assert!(split_dim < dim, "split prior needs at least one nuisance dimension");
        let mut widths = vec![split_dim + classes];
        widths.extend_from_slice(hidden);
        widths.push(2 * (dim - split_dim));
        Self { classes, split_dim, anchor_scale, log_scale: 0.0, head: MlpNet::new(&widths, 0.0, rng) }
    }

    pub fn dim(&self) -> usize {
        self.split_dim + self.head.output_dim() / 2
    }

    fn anchor(&self, j: usize, y: usize) -> f64 {
        if j == y {
            self.anchor_scale
        } else {
            0.0
        }
    }

    fn head_input(&self, zs: &[f64], y: usize) -> Vec<f64> {
        let mut v = zs.to_vec();
        v.extend((0..self.classes).map(|c| if c == y { 1.0 } else { 0.0 }));
        v
    }

    /// `log p(z_s | y)`.
    pub fn class_logprob(&self, zs: &[f64], y: usize) -> f64 {
        let inv = (-self.log_scale).exp();
        zs.iter()
            .enumerate()
            .map(|(j, &v)| {
                let u = (v - self.anchor(j, y)) * inv;
                -0.5 * LN_2PI - self.log_scale - 0.5 * u * u
            })
            .sum()
    }

    fn head_params(&self, zs: &[f64], y: usize) -> (Vec<f64>, Vec<f64>) {
        let out = self.head.forward(&self.head_input(zs, y));
        let dn = out.len() / 2;
        let mean = out[..dn].to_vec();
        let log_std = out[dn..].iter().map(|r| LOG_STD_BOUND * (r / LOG_STD_BOUND).tanh()).collect();
        (mean, log_std)
    }

    /// `log p(z_n | z_s, y)`.
    pub fn nuisance_logprob(&self, zs: &[f64], zn: &[f64], y: usize) -> f64 {
        let (mean, log_std) = self.head_params(zs, y);
        crate::math::diag_normal_logpdf(zn, &mean, &log_std)
    }

    pub fn logprob(&self, z: &[f64], y: usize) -> f64 {
        let (zs, zn) = z.split_at(self.split_dim);
        self.class_logprob(zs, y) + self.nuisance_logprob(zs, zn, y)
    }

    pub fn logprob_grad(&self, z: &[f64], y: usize, weight: f64, grad_z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        let ds = self.split_dim;
        let (zs, zn) = z.split_at(ds);
        let inv = (-self.log_scale).exp();
        let mut lp = 0.0;
        let mut g_log_scale = 0.0;
        for j in 0..ds {
            let u = (zs[j] - self.anchor(j, y)) * inv;
            lp += -0.5 * LN_2PI - self.log_scale - 0.5 * u * u;
            grad_z[j] -= weight * u * inv;
            g_log_scale += weight * (u * u - 1.0);
        }
        let acts = self.head.forward_cached(&self.head_input(zs, y));
        let out = acts.last().unwrap();
        let dn = zn.len();
        let mut g_out = vec![0.0; 2 * dn];
        for k in 0..dn {
            let th = (out[dn + k] / LOG_STD_BOUND).tanh();
            let ls = LOG_STD_BOUND * th;
            let inv_k = (-ls).exp();
            let u = (zn[k] - out[k]) * inv_k;
            lp += -0.5 * LN_2PI - ls - 0.5 * u * u;
            grad_z[ds + k] -= weight * u * inv_k;
            g_out[k] = weight * u * inv_k;
            g_out[dn + k] = weight * (u * u - 1.0) * (1.0 - th * th);
        }
        let g_in = match grad {
            Some(g) => {
                g[0] += g_log_scale;
                self.head.backward(&acts, &g_out, Some(&mut g[1..]))
            }
            None => self.head.backward(&acts, &g_out, None),
        };
        for j in 0..ds {
            grad_z[j] += g_in[j];
        }
        lp
    }

    pub fn sample(&self, y: usize, rng: &mut Rng) -> Vec<f64> {
        let sd = self.log_scale.exp();
        let mut z: Vec<f64> =
            (0..self.split_dim).map(|j| self.anchor(j, y) + sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let (mean, log_std) = self.head_params(&z, y);
        z.extend(mean.iter().zip(&log_std).map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal)));
        z
    }

    pub fn param_count(&self) -> usize {
        1 + self.head.param_count()
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        out.push(self.log_scale);
        self.head.params(out);
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        self.log_scale = src[0];
        1 + self.head.set_params(&src[1..])
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        out.push(format!("{prefix}.log_scale"));
        self.head.param_names(&format!("{prefix}.head"), out);
    }

    pub fn is_valid(&self) -> bool {
        self.log_scale.is_finite() && self.anchor_scale.is_finite() && self.head.is_consistent()
    }
}
