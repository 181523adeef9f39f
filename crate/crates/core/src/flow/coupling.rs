use serde::{Deserialize, Serialize};

use super::mlp::MlpNet;
use crate::rng::Rng;

/// Affine coupling: coordinates in `cond` pass through unchanged and
/// parameterise an elementwise affine map of the coordinates in `transformed`.
///
/// The effective scale is `exp(scale_clamp * tanh(raw))`, which is strictly
/// positive and bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingLayer {
    pub cond: Vec<usize>,
    pub transformed: Vec<usize>,
    pub net: MlpNet,
    pub scale_clamp: f64,
}

/// First-half / second-half partition of `0..dim`; `swap` exchanges roles.
pub fn half_partition(dim: usize, swap: bool) -> (Vec<usize>, Vec<usize>) {
    let first: Vec<usize> = (0..dim / 2).collect();
    let second: Vec<usize> = (dim / 2..dim).collect();
    if swap {
        (second, first)
    } else {
        (first, second)
    }
}

impl CouplingLayer {
    /// `output_scale = 0` starts the layer at the identity map.
    pub fn new(
        cond: Vec<usize>,
        transformed: Vec<usize>,
        hidden: &[usize],
        scale_clamp: f64,
        output_scale: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(!cond.is_empty() && !transformed.is_empty(), "coupling partitions must be non-empty");
        assert!(scale_clamp > 0.0);
        let mut widths = vec![cond.len()];
        widths.extend_from_slice(hidden);
        widths.push(2 * transformed.len());
        let net = MlpNet::new(&widths, output_scale, rng);
        Self { cond, transformed, net, scale_clamp }
    }

    pub fn dim(&self) -> usize {
        self.cond.len() + self.transformed.len()
    }

    fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.cond.iter().map(|&i| x[i]).collect()
    }

    fn log_scales(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|r| self.scale_clamp * r.tanh()).collect()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let nb = self.transformed.len();
        let out = self.net.forward(&self.gather(x));
        let log_s = self.log_scales(&out[..nb]);
        let mut y = x.to_vec();
        for (k, &j) in self.transformed.iter().enumerate() {
            y[j] = log_s[k].exp() * x[j] + out[nb + k];
        }
        (y, log_s.iter().sum())
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let nb = self.transformed.len();
        let out = self.net.forward(&self.gather(y));
        let log_s = self.log_scales(&out[..nb]);
        let mut x = y.to_vec();
        for (k, &j) in self.transformed.iter().enumerate() {
            x[j] = (y[j] - out[nb + k]) * (-log_s[k]).exp();
        }
        x
    }

    pub fn backward(&self, x: &[f64], g_out: &[f64], g_logdet: f64, grad: Option<&mut [f64]>) -> Vec<f64> {
        let nb = self.transformed.len();
        let acts = self.net.forward_cached(&self.gather(x));
        let out = acts.last().unwrap();
        let mut g_x = g_out.to_vec();
        let mut g_net = vec![0.0; 2 * nb];
        for (k, &j) in self.transformed.iter().enumerate() {
            let th = out[k].tanh();
            let s = (self.scale_clamp * th).exp();
            let gy = g_out[j];
            g_x[j] = gy * s;
            let g_log_s = gy * s * x[j] + g_logdet;
            g_net[k] = g_log_s * self.scale_clamp * (1.0 - th * th);
            g_net[nb + k] = gy;
        }
        let g_cond = self.net.backward(&acts, &g_net, grad);
        for (k, &i) in self.cond.iter().enumerate() {
            g_x[i] += g_cond[k];
        }
        g_x
    }

    pub fn is_partition(&self) -> bool {
        let d = self.dim();
        let mut seen = vec![false; d];
        for &i in self.cond.iter().chain(&self.transformed) {
            if i >= d || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        !self.cond.is_empty() && !self.transformed.is_empty()
    }
}
