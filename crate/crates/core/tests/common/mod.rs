//! Numerical checks shared by the flow correctness tests and the acceptance
//! suite.
#![allow(dead_code)]

use condflow::datagen::Sample;
use condflow::flow::{FlowConfig, FlowModel, Mixing, PriorConfig};
use condflow::rng::seeded;
use condflow::training::{mean_objective, parameter_gradients, ObjectiveSpec};
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn random_points(dim: usize, n: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..n).map(|_| (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

pub fn random_batch(dim: usize, classes: usize, n: usize, seed: u64) -> Vec<Sample> {
    random_points(dim, n, 1.0, seed).into_iter().enumerate().map(|(i, x)| Sample { x, y: i % classes }).collect()
}

/// Flow configurations covering every mixing layer and prior family.
pub fn model_zoo(dim: usize) -> Vec<(String, FlowModel)> {
    let priors = [
        PriorConfig::Gmm { radius: 1.5 },
        PriorConfig::Laplace { radius: 1.0 },
        PriorConfig::Cauchy { radius: 1.0 },
        PriorConfig::GaussLaplace { radius: 1.0, gauss_weight: 0.6 },
        PriorConfig::Smoothed { radius: 1.0, smoothing: 0.1 },
        PriorConfig::Split { anchor_scale: 1.0, hidden: vec![6] },
    ];
    let mut zoo = Vec::new();
    for (k, mixing) in [Mixing::Lu, Mixing::Permutation, Mixing::None].into_iter().enumerate() {
        for (j, prior) in priors.iter().enumerate() {
            if matches!(prior, PriorConfig::Split { .. }) && dim <= 2 {
                continue;
            }
            let cfg = FlowConfig {
                dim,
                classes: 2,
                blocks: 2,
                hidden: vec![8],
                mixing,
                prior: prior.clone(),
                seed: 100 + 10 * k as u64 + j as u64,
                ..FlowConfig::default()
            };
            zoo.push((format!("{mixing:?}/{prior:?}"), FlowModel::random(&cfg, 0.8).unwrap()));
        }
    }
    zoo
}

pub fn max_roundtrip_error(model: &FlowModel, xs: &[Vec<f64>]) -> f64 {
    xs.iter()
        .map(|x| {
            let z = model.forward(x).unwrap().z;
            let back = model.inverse(&z).unwrap();
            x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `ln |det A|` by Gaussian elimination with partial pivoting.
pub fn ln_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        acc += p.abs().ln();
        for row in col + 1..n {
            let f = a[row][col] / p;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    acc
}

/// Largest `|logdet - ln|det J||` with `J` from central differences.
pub fn max_logdet_error(model: &FlowModel, xs: &[Vec<f64>]) -> f64 {
    let h = 1e-5;
    let d = model.dim;
    xs.iter()
        .map(|x| {
            let mut jac = vec![vec![0.0; d]; d];
            for j in 0..d {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let (zp, zm) = (model.forward(&xp).unwrap().z, model.forward(&xm).unwrap().z);
                for i in 0..d {
                    jac[i][j] = (zp[i] - zm[i]) / (2.0 * h);
                }
            }
            (model.forward(x).unwrap().logdet - ln_abs_det(jac)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Largest relative error between analytic parameter gradients of the mean
/// objective and central differences.
pub fn max_param_grad_error(model: &FlowModel, batch: &[Sample], objective: &ObjectiveSpec) -> (f64, String) {
    let (_, grad) = parameter_gradients(model, batch, objective).unwrap();
    let params = model.params();
    let names = model.param_names();
    let h = 1e-6;
    let mut worst = (0.0, String::new());
    let mut m = model.clone();
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] = params[k] + h;
        m.set_params(&p);
        let fp = mean_objective(&m, batch, objective).unwrap();
        p[k] = params[k] - h;
        m.set_params(&p);
        let fm = mean_objective(&m, batch, objective).unwrap();
        let e = rel_err(grad[k], (fp - fm) / (2.0 * h));
        if e > worst.0 {
            worst = (e, names[k].clone());
        }
    }
    worst
}

/// Same check for the input gradient of `log p(x | y)`.
pub fn max_input_grad_error(model: &FlowModel, xs: &[Vec<f64>], y: usize) -> f64 {
    let h = 1e-6;
    let mut weights = vec![0.0; model.classes];
    weights[y] = 1.0;
    let mut worst: f64 = 0.0;
    for x in xs {
        let (_, g) = model.input_gradient(x, |_| weights.clone()).unwrap();
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (model.log_likelihood(&xp, y).unwrap() - model.log_likelihood(&xm, y).unwrap()) / (2.0 * h);
            worst = worst.max(rel_err(g[j], fd));
        }
    }
    worst
}

/// Midpoint-rule integral of `p(x | y)` over `[-half, half]^2`.
pub fn quadrature_mass_2d(model: &FlowModel, y: usize, half: f64, cells: usize) -> f64 {
    assert_eq!(model.dim, 2);
    let step = 2.0 * half / cells as f64;
    let mut total = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let x = [-half + (i as f64 + 0.5) * step, -half + (j as f64 + 0.5) * step];
            total += model.log_likelihood(&x, y).unwrap().exp();
        }
    }
    total * step * step
}

/// 2-D model for the quadrature check: light-tailed prior, random layers.
pub fn quadrature_model(mixing: Mixing, seed: u64) -> FlowModel {
    let cfg = FlowConfig {
        dim: 2,
        classes: 2,
        blocks: 3,
        hidden: vec![16],
        mixing,
        prior: PriorConfig::Gmm { radius: 1.0 },
        seed,
        ..FlowConfig::default()
    };
    FlowModel::random(&cfg, 0.6).unwrap()
}
