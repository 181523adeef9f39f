use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension affine normalisation `y = (x + bias) * exp(log_scale)`
/// with data-dependent initialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActNormLayer {
    pub log_scale: Vec<f64>,
    pub bias: Vec<f64>,
    pub initialized: bool,
}

impl ActNormLayer {
    pub fn new(dim: usize) -> Self {
        Self { log_scale: vec![0.0; dim], bias: vec![0.0; dim], initialized: false }
    }

    /// A layer with fixed scale and bias, already marked initialised.
    pub fn with_params(log_scale: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(log_scale.len(), bias.len());
        Self { log_scale, bias, initialized: true }
    }

    pub fn dim(&self) -> usize {
        self.log_scale.len()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let y = x
            .iter()
            .zip(&self.bias)
            .zip(&self.log_scale)
            .map(|((x, b), s)| (x + b) * s.exp())
            .collect();
        (y, self.log_scale.iter().sum())
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.bias)
            .zip(&self.log_scale)
            .map(|((y, b), s)| y * (-s).exp() - b)
            .collect()
    }

    pub fn backward(&self, x: &[f64], g_out: &[f64], g_logdet: f64, grad: Option<&mut [f64]>) -> Vec<f64> {
        let d = self.dim();
        let scale: Vec<f64> = self.log_scale.iter().map(|s| s.exp()).collect();
        if let Some(grad) = grad {
            for j in 0..d {
                let y = (x[j] + self.bias[j]) * scale[j];
                grad[j] += g_out[j] * y + g_logdet;
                grad[d + j] += g_out[j] * scale[j];
            }
        }
        g_out.iter().zip(&scale).map(|(g, s)| g * s).collect()
    }

    /// Sets bias and scale so that `batch` maps to zero mean and unit
    /// (population) variance per dimension.
    pub fn initialize(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if batch.len() < 2 {
            return Err(Error::DegenerateInit(format!("batch of size {} (need at least 2)", batch.len())));
        }
        let d = self.dim();
        let n = batch.len() as f64;
        for j in 0..d {
            let mean = batch.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = batch.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
            if !(var > 1e-300) || !var.is_finite() {
                return Err(Error::DegenerateInit(format!("dimension {j} has zero variance")));
            }
            self.bias[j] = -mean;
            self.log_scale[j] = -0.5 * var.ln();
        }
        self.initialized = true;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        2 * self.dim()
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.log_scale);
        out.extend_from_slice(&self.bias);
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let d = self.dim();
        self.log_scale.copy_from_slice(&src[..d]);
        self.bias.copy_from_slice(&src[d..2 * d]);
        2 * d
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        out.extend((0..self.dim()).map(|j| format!("{prefix}.log_scale[{j}]")));
        out.extend((0..self.dim()).map(|j| format!("{prefix}.bias[{j}]")));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_batch_gives_identity_init() {
        let batch = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let mut layer = ActNormLayer::new(2);
        layer.initialize(&batch).unwrap();
        for j in 0..2 {
            assert!(layer.bias[j].abs() < 1e-15);
            assert!(layer.log_scale[j].abs() < 1e-15);
        }
        assert!(layer.initialized);
    }

    #[test]
    fn shifted_scaled_batch_is_standardized() {
        // mean 3, std 2 in both dimensions
        let batch: Vec<Vec<f64>> = [1.0, 5.0, 1.0, 5.0].iter().map(|&v| vec![v, 8.0 - v - 2.0]).collect();
        let mut layer = ActNormLayer::new(2);
        layer.initialize(&batch).unwrap();
        let out: Vec<Vec<f64>> = batch.iter().map(|x| layer.forward(x).0).collect();
        for j in 0..2 {
            let col: Vec<f64> = out.iter().map(|v| v[j]).collect();
            let m = crate::math::mean(&col);
            let v = crate::math::variance(&col);
            assert!(m.abs() < 1e-8 && (v - 1.0).abs() < 1e-8, "mean {m} var {v}");
        }
    }

    #[test]
    fn identical_vectors_are_degenerate() {
        let batch = vec![vec![2.0, 3.0]; 5];
        let mut layer = ActNormLayer::new(2);
        assert!(matches!(layer.initialize(&batch), Err(Error::DegenerateInit(_))));
        assert!(!layer.initialized);
    }
}
