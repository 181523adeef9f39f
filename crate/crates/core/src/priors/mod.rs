//! Class-conditional latent densities `p(z | y)`.

mod gmm;
mod robust;
mod smoothed;
mod split;

pub use gmm::GmmPrior;
pub use robust::{RobustFamily, RobustPrior};
pub use smoothed::SmoothedPrior;
pub use split::{split_partition, SplitPrior};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Gmm(GmmPrior),
    Split(SplitPrior),
    Robust(RobustPrior),
    Smoothed(SmoothedPrior),
}

impl Prior {
    pub fn classes(&self) -> usize {
        match self {
            Prior::Gmm(p) => p.classes(),
            Prior::Split(p) => p.classes,
            Prior::Robust(p) => p.classes(),
            Prior::Smoothed(p) => p.base.classes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::Gmm(p) => p.dim(),
            Prior::Split(p) => p.dim(),
            Prior::Robust(p) => p.dim(),
            Prior::Smoothed(p) => p.base.dim(),
        }
    }

    fn check_class(&self, y: usize) -> Result<()> {
        if y >= self.classes() {
            return Err(Error::InvalidClass { class: y, classes: self.classes() });
        }
        Ok(())
    }

    pub fn logprob(&self, z: &[f64], y: usize) -> Result<f64> {
        self.check_class(y)?;
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(match self {
            Prior::Gmm(p) => p.logprob(z, y),
            Prior::Split(p) => p.logprob(z, y),
            Prior::Robust(p) => p.logprob(z, y),
            Prior::Smoothed(p) => p.logprob(z, y),
        })
    }

    /// Evaluates `log p(z | y)` and accumulates `weight` times its gradient
    /// into `grad_z` and, if given, into `grad` (laid out like [`Prior::params`]).
    /// The class index must be valid.
    pub fn logprob_grad(&self, z: &[f64], y: usize, weight: f64, grad_z: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
        match self {
            Prior::Gmm(p) => p.logprob_grad(z, y, weight, grad_z, grad),
            Prior::Split(p) => p.logprob_grad(z, y, weight, grad_z, grad),
            Prior::Robust(p) => p.logprob_grad(z, y, weight, grad_z, grad),
            Prior::Smoothed(p) => p.logprob_grad(z, y, weight, grad_z, grad),
        }
    }

    pub fn sample(&self, y: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        self.check_class(y)?;
        Ok(match self {
            Prior::Gmm(p) => p.sample(y, rng),
            Prior::Split(p) => p.sample(y, rng),
            Prior::Robust(p) => p.sample(y, rng),
            Prior::Smoothed(p) => p.sample(y, rng),
        })
    }

    /// False for priors whose samples have no mean (Cauchy).
    pub fn has_mean(&self) -> bool {
        match self {
            Prior::Robust(p) => p.has_mean(),
            _ => true,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Prior::Gmm(p) => p.param_count(),
            Prior::Split(p) => p.param_count(),
            Prior::Robust(p) => p.param_count(),
            Prior::Smoothed(p) => p.base.param_count(),
        }
    }

    pub fn params(&self, out: &mut Vec<f64>) {
        match self {
            Prior::Gmm(p) => p.params(out),
            Prior::Split(p) => p.params(out),
            Prior::Robust(p) => p.params(out),
            Prior::Smoothed(p) => p.base.params(out),
        }
    }

    pub fn set_params(&mut self, src: &[f64]) -> usize {
        match self {
            Prior::Gmm(p) => p.set_params(src),
            Prior::Split(p) => p.set_params(src),
            Prior::Robust(p) => p.set_params(src),
            Prior::Smoothed(p) => p.base.set_params(src),
        }
    }

    pub fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        match self {
            Prior::Gmm(p) => p.param_names(prefix, out),
            Prior::Split(p) => p.param_names(prefix, out),
            Prior::Robust(p) => p.param_names(prefix, out),
            Prior::Smoothed(p) => p.base.param_names(prefix, out),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Prior::Gmm(p) => p.is_valid(),
            Prior::Split(p) => p.is_valid(),
            Prior::Robust(p) => p.is_valid(),
            Prior::Smoothed(p) => p.base.is_valid() && (0.0..1.0).contains(&p.smoothing),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::{LN_2, PI};

    fn unit_gmm(classes: usize, dim: usize) -> GmmPrior {
        GmmPrior::new(vec![vec![0.0; dim]; classes], vec![vec![0.0; dim]; classes])
    }

    fn random_gmm(classes: usize, dim: usize, seed: u64) -> GmmPrior {
        use rand::Rng as _;
        let mut rng = seeded(seed);
        let mut row = |s: f64| (0..dim).map(|_| s * (rng.random::<f64>() - 0.5)).collect::<Vec<f64>>();
        let means = (0..classes).map(|_| row(4.0)).collect();
        let stds = (0..classes).map(|_| row(1.0)).collect();
        GmmPrior::new(means, stds)
    }

    /// Midpoint-rule integral of `exp(f)` over `[-r, r]^dim` for dim <= 2.
    fn quad(dim: usize, r: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        let h = 2.0 * r / n as f64;
        let pts: Vec<f64> = (0..n).map(|i| -r + (i as f64 + 0.5) * h).collect();
        match dim {
            1 => pts.iter().map(|&a| f(&[a]).exp()).sum::<f64>() * h,
            2 => pts.iter().flat_map(|&a| pts.iter().map(move |&b| (a, b))).map(|(a, b)| f(&[a, b]).exp()).sum::<f64>() * h * h,
            _ => unreachable!(),
        }
    }

    #[test]
    fn gmm_at_mode() {
        let p = Prior::Gmm(unit_gmm(3, 2));
        assert!((p.logprob(&[0.0, 0.0], 1).unwrap() + (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn laplace_at_mode() {
        let p = Prior::Robust(RobustPrior::new(RobustFamily::Laplace, vec![vec![0.0]], vec![vec![0.0]]));
        assert!((p.logprob(&[0.0], 0).unwrap() + LN_2).abs() < 1e-15);
    }

    #[test]
    fn smoothing_zero_reduces_to_base() {
        let base = random_gmm(3, 2, 5);
        let smooth = SmoothedPrior::new(base.clone(), 0.0);
        let mut rng = seeded(9);
        for _ in 0..20 {
            let z = base.sample(0, &mut rng);
            for y in 0..3 {
                assert_eq!(smooth.logprob(&z, y), base.logprob(&z, y));
            }
        }
    }

    #[test]
    fn smoothing_is_monotone_at_class_mean() {
        let base = random_gmm(4, 2, 6);
        for y in 0..4 {
            let z = base.means[y].clone();
            let mut prev = f64::INFINITY;
            for k in 0..10 {
                let eps = k as f64 * 0.1;
                let lp = SmoothedPrior::new(base.clone(), eps).logprob(&z, y);
                assert!(lp <= prev + 1e-12, "eps {eps}: {lp} > {prev}");
                prev = lp;
            }
        }
    }

    #[test]
    fn densities_normalize_on_grid() {
        let mut rng = seeded(2);
        let split = SplitPrior::new(1, 2, 1, 1.5, &[6], &mut rng);
        let mut split_random = split.clone();
        // give the head a non-trivial (but tame) conditional
        let mut params = vec![];
        split_random.head.params(&mut params);
        use rand::Rng as _;
        let noisy: Vec<f64> = params.iter().map(|_| 0.3 * (rng.random::<f64>() - 0.5)).collect();
        split_random.head.set_params(&noisy);
        let gmm = random_gmm(2, 2, 3);
        let priors = vec![
            (Prior::Gmm(gmm.clone()), 12.0, 0.02),
            (Prior::Smoothed(SmoothedPrior::new(gmm, 0.3)), 12.0, 0.02),
            (Prior::Robust(RobustPrior::new(RobustFamily::Laplace, vec![vec![0.3, -0.2]], vec![vec![0.0, -0.5]])), 16.0, 0.02),
            (
                Prior::Robust(RobustPrior::new(
                    RobustFamily::GaussLaplace { gauss_weight: 0.4 },
                    vec![vec![0.3, -0.2]],
                    vec![vec![0.0, -0.5]],
                )),
                16.0,
                0.02,
            ),
            (Prior::Split(split_random), 12.0, 0.02),
        ];
        for (p, r, tol) in &priors {
            for y in 0..p.classes() {
                let mass = quad(2, *r, 600, |z| p.logprob(z, y).unwrap());
                assert!((mass - 1.0).abs() < *tol, "{p:?} class {y}: mass {mass}");
            }
        }
        // Cauchy in 1-D on a wide grid, with the analytic tail mass added back.
        let loc = 0.4;
        let cauchy = Prior::Robust(RobustPrior::new(RobustFamily::Cauchy, vec![vec![loc]], vec![vec![0.0]]));
        let r = 200.0;
        let inner = quad(1, r, 200_000, |z| cauchy.logprob(z, 0).unwrap());
        let tails = 1.0 - ((r - loc).atan() + (r + loc).atan()) / PI;
        assert!((inner + tails - 1.0).abs() < 0.05);
        assert!((inner - 1.0).abs() < 0.05);
    }

    #[test]
    fn gmm_class_permutation_symmetry() {
        let base = random_gmm(3, 2, 8);
        let perm = [2usize, 0, 1];
        let permuted = GmmPrior::new(
            perm.iter().map(|&k| base.means[k].clone()).collect(),
            perm.iter().map(|&k| base.log_stds[k].clone()).collect(),
        );
        let z = [0.7, -1.2];
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(permuted.logprob(&z, new), base.logprob(&z, old));
        }
    }

    #[test]
    fn split_prior_factorizes() {
        let mut rng = seeded(4);
        let prior = SplitPrior::new(2, 5, 2, 5.0, &[8], &mut rng);
        let z = prior.sample(1, &mut rng);
        let (zs, zn) = split_partition(&z, 2).unwrap();
        let total = prior.logprob(&z, 1);
        let parts = prior.class_logprob(&zs, 1) + prior.nuisance_logprob(&zs, &zn, 1);
        assert!((total - parts).abs() < 1e-12);
    }

    #[test]
    fn split_partition_edges() {
        let (a, b) = split_partition(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!((a, b), (vec![1.0, 2.0], vec![3.0, 4.0]));
        assert!(split_partition(&[1.0, 2.0], 2).is_err());
        assert!(split_partition(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn degenerate_gmm_samples_the_mean() {
        let mut g = unit_gmm(2, 2);
        g.means[1] = vec![3.0, -1.0];
        g.log_stds[1] = vec![(1e-8f64).ln(); 2];
        let mut rng = seeded(1);
        let z = g.sample(1, &mut rng);
        assert!((z[0] - 3.0).abs() < 1e-6 && (z[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn gmm_sample_mean_within_clt_bound() {
        let mut g = unit_gmm(2, 2);
        g.means[0] = vec![1.5, -2.0];
        g.log_stds[0] = vec![0.5f64.ln(), 2f64.ln()];
        let mut rng = seeded(77);
        let n = 100_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let z = g.sample(0, &mut rng);
            acc[0] += z[0];
            acc[1] += z[1];
        }
        for j in 0..2 {
            let m = acc[j] / n as f64;
            let sd = g.log_stds[0][j].exp();
            assert!((m - g.means[0][j]).abs() < 3.0 * sd / (n as f64).sqrt(), "dim {j}: {m}");
        }
    }

    #[test]
    fn split_samples_cluster_at_anchor() {
        let mut rng = seeded(12);
        let prior = SplitPrior::new(3, 6, 3, 5.0, &[8], &mut rng);
        let n = 20_000;
        for y in 0..3 {
            let mut acc = [0.0; 3];
            for _ in 0..n {
                let z = prior.sample(y, &mut rng);
                for j in 0..3 {
                    acc[j] += z[j];
                }
            }
            for j in 0..3 {
                let expected = if j == y { 5.0 } else { 0.0 };
                assert!((acc[j] / n as f64 - expected).abs() < 3.0 / (n as f64).sqrt() * 1.5);
            }
        }
    }

    #[test]
    fn prior_gradients_match_finite_differences() {
        let mut rng = seeded(21);
        let mut split = SplitPrior::new(2, 4, 2, 2.0, &[5], &mut rng);
        let mut hp = vec![];
        split.head.params(&mut hp);
        use rand::Rng as _;
        let hp: Vec<f64> = hp.iter().map(|_| 0.4 * (rng.random::<f64>() - 0.5)).collect();
        split.head.set_params(&hp);
        let priors = vec![
            Prior::Gmm(random_gmm(3, 4, 1)),
            Prior::Smoothed(SmoothedPrior::new(random_gmm(3, 4, 2), 0.2)),
            Prior::Robust(RobustPrior::new(RobustFamily::Cauchy, random_gmm(2, 4, 3).means, random_gmm(2, 4, 3).log_stds)),
            Prior::Robust(RobustPrior::new(
                RobustFamily::GaussLaplace { gauss_weight: 0.3 },
                random_gmm(2, 4, 4).means,
                random_gmm(2, 4, 4).log_stds,
            )),
            Prior::Split(split),
        ];
        let z = [0.3, -0.8, 1.1, 0.45];
        for prior in priors {
            let y = 1;
            let mut gz = vec![0.0; 4];
            let mut gp = vec![0.0; prior.param_count()];
            prior.logprob_grad(&z, y, 1.0, &mut gz, Some(&mut gp));
            let h = 1e-6;
            for j in 0..4 {
                let (mut zp, mut zm) = (z, z);
                zp[j] += h;
                zm[j] -= h;
                let fd = (prior.logprob(&zp, y).unwrap() - prior.logprob(&zm, y).unwrap()) / (2.0 * h);
                assert!((fd - gz[j]).abs() < 1e-6, "{prior:?} z[{j}]");
            }
            let mut params = vec![];
            prior.params(&mut params);
            for k in 0..params.len() {
                let mut q = prior.clone();
                let mut pp = params.clone();
                pp[k] += h;
                q.set_params(&pp);
                let fp = q.logprob(&z, y).unwrap();
                pp[k] -= 2.0 * h;
                q.set_params(&pp);
                let fm = q.logprob(&z, y).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - gp[k]).abs() < 1e-6, "param {k}: {fd} vs {}", gp[k]);
            }
        }
    }
}
