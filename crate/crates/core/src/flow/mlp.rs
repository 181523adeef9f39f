use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected network with a smooth hidden nonlinearity and a linear
/// output layer. Weights are stored row-major (`out x in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub widths: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl MlpNet {
    /// Glorot-scaled random hidden layers; the output layer is scaled by
    /// `output_scale` (0 gives an exactly-zero network output).
    pub fn new(widths: &[usize], output_scale: f64, rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let n_layers = widths.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let scale = if l + 1 == n_layers {
                output_scale / (fan_in as f64).sqrt()
            } else {
                (2.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let w = (0..fan_in * fan_out)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let b = if l + 1 == n_layers && output_scale == 0.0 {
                vec![0.0; fan_out]
            } else {
                (0..fan_out).map(|_| 0.1 * scale * rng.sample::<f64, _>(StandardNormal)).collect()
            };
            weights.push(w);
            biases.push(b);
        }
        Self { widths: widths.to_vec(), weights, biases, activation: Activation::Tanh }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).pop().unwrap()
    }

    /// Returns the activations of every layer, input first, output last.
    pub fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.input_dim());
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let input = &acts[l];
            let w = &self.weights[l];
            let mut out = self.biases[l].clone();
            for (o, out_o) in out.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *out_o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < n_layers {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            debug_assert_eq!(out.len(), fan_out);
            acts.push(out);
        }
        acts
    }

    /// Reverse pass. Accumulates parameter gradients into `grad` (laid out
    /// like [`MlpNet::params`]) when given, and returns the input gradient.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], mut grad: Option<&mut [f64]>) -> Vec<f64> {
        let n_layers = self.weights.len();
        let offsets = self.layer_offsets();
        let mut g = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            if l + 1 < n_layers {
                for (gv, &a) in g.iter_mut().zip(&acts[l + 1]) {
                    *gv *= self.activation.derivative_from_output(a);
                }
            }
            let input = &acts[l];
            if let Some(grad) = grad.as_deref_mut() {
                let (w_off, b_off) = offsets[l];
                for o in 0..fan_out {
                    let go = g[o];
                    if go != 0.0 {
                        let row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                        for (r, &x) in row.iter_mut().zip(input) {
                            *r += go * x;
                        }
                    }
                    grad[b_off + o] += go;
                }
            }
            let w = &self.weights[l];
            let mut g_in = vec![0.0; fan_in];
            for o in 0..fan_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                let row = &w[o * fan_in..(o + 1) * fan_in];
                for (gi, &wv) in g_in.iter_mut().zip(row) {
                    *gi += go * wv;
                }
            }
            g = g_in;
        }
        g
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let r = (off, off + w.len());
                off += w.len() + b.len();
                r
            })
            .collect()
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&src[off..off + nw]);
            off += nw;
            b.copy_from_slice(&src[off..off + nb]);
            off += nb;
        }
        off
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for l in 0..self.weights.len() {
            let fan_in = self.widths[l];
            for k in 0..self.weights[l].len() {
                out.push(format!("{prefix}.w{l}[{},{}]", k / fan_in, k % fan_in));
            }
            for k in 0..self.biases[l].len() {
                out.push(format!("{prefix}.b{l}[{k}]"));
            }
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.widths.len() == self.weights.len() + 1
            && self.weights.len() == self.biases.len()
            && (0..self.weights.len()).all(|l| {
                self.weights[l].len() == self.widths[l] * self.widths[l + 1]
                    && self.biases[l].len() == self.widths[l + 1]
            })
            && self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded(3);
        let net = MlpNet::new(&[3, 5, 4, 2], 1.0, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let proj = [0.6, -1.3];
        let f = |x: &[f64]| net.forward(x).iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>();
        let acts = net.forward_cached(&x);
        let g = net.backward(&acts, &proj, None);
        for i in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "dim {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn zero_output_scale_gives_zero_output() {
        let mut rng = seeded(1);
        let net = MlpNet::new(&[2, 8, 4], 0.0, &mut rng);
        assert!(net.forward(&[1.0, -2.0]).iter().all(|&v| v == 0.0));
        assert!(net.is_consistent());
    }
}
