use rand::Rng as _;
use rand_distr::StandardNormal;
use serde_json::json;

use super::{Dataset, DatasetMeta, Sample};
use crate::error::{invalid, Result};
use crate::oracle::CounterexampleParams;
use crate::rng::Rng;

/// Samples `(x, y)` from the annulus data distribution `p` with uniform labels.
pub fn make_annuli_dataset(params: &CounterexampleParams, n: usize, seed: u64, rng: &mut Rng) -> Result<Dataset> {
    if params.dim < 2 {
        return Err(invalid("annuli dataset needs d >= 2"));
    }
    let samples = (0..n)
        .map(|_| {
            let (x, y) = params.sample_p(rng);
            Sample { x, y }
        })
        .collect();
    let meta = DatasetMeta { kind: "annuli".into(), params: serde_json::to_value(params)?, seed };
    Dataset::new(params.dim, 2, samples, meta)
}

/// `C` points in `R^D` with all pairwise distances equal to `separation`,
/// centred at the origin. Needs `D >= C - 1`.
pub fn simplex_means(classes: usize, dim: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    if classes < 2 || dim + 1 < classes {
        return Err(invalid(format!("{classes} simplex vertices do not fit in {dim} dimensions")));
    }
    // Orthonormal basis of the sum-zero subspace of R^C (Helmert rows).
    let scale = separation / std::f64::consts::SQRT_2;
    Ok((0..classes)
        .map(|i| {
            let mut m = vec![0.0; dim];
            for k in 1..classes {
                let norm = ((k * (k + 1)) as f64).sqrt();
                let coord = match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                };
                m[k - 1] = scale * coord;
            }
            m
        })
        .collect())
}

/// Isotropic Gaussian blobs around simplex vertices.
pub fn make_blobs(classes: usize, dim: usize, separation: f64, sigma: f64, n: usize, seed: u64, rng: &mut Rng) -> Result<Dataset> {
    if !(sigma >= 0.0) || !(separation >= 0.0) {
        return Err(invalid("separation and sigma must be non-negative"));
    }
    let means = simplex_means(classes, dim, separation)?;
    let samples = (0..n)
        .map(|_| {
            let y = rng.random_range(0..classes);
            let x = means[y].iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            Sample { x, y }
        })
        .collect();
    let meta = DatasetMeta {
        kind: "blobs".into(),
        params: json!({"classes": classes, "dim": dim, "separation": separation, "sigma": sigma}),
        seed,
    };
    Dataset::new(dim, classes, samples, meta)
}
