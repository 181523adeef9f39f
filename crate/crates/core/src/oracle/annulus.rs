use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{ln_sub_exp, ln_unit_ball_volume, logsumexp, norm2};
use crate::rng::Rng;

/// Uniform distribution on `{x in R^d : inner <= |x| <= outer}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub inner: f64,
    pub outer: f64,
    pub dim: usize,
}

impl AnnulusSpec {
    pub fn new(inner: f64, outer: f64, dim: usize) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) || dim == 0 {
            return Err(invalid(format!("invalid annulus ({inner}, {outer}) in dimension {dim}")));
        }
        Ok(Self { inner, outer, dim })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        Self::new(0.0, radius, dim)
    }

    /// `ln(outer^d - inner^d)`, computed without forming the powers.
    pub fn ln_radial_volume(&self) -> f64 {
        let d = self.dim as f64;
        let top = d * self.outer.ln();
        if self.inner == 0.0 {
            top
        } else {
            ln_sub_exp(top, d * self.inner.ln())
        }
    }

    /// `ln` of the annulus volume `C_d (b^d - a^d)`.
    pub fn ln_volume(&self) -> f64 {
        ln_unit_ball_volume(self.dim) + self.ln_radial_volume()
    }

    pub fn contains_radius(&self, r: f64) -> bool {
        r >= self.inner && r <= self.outer
    }

    pub fn log_density_at_radius(&self, r: f64) -> f64 {
        if self.contains_radius(r) {
            -self.ln_volume()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample_radius(&self, rng: &mut Rng) -> f64 {
        // r^d uniform on [a^d, b^d]; scaled by b to stay in range for large d
        let d = self.dim as f64;
        let ratio_d = if self.inner == 0.0 { 0.0 } else { (d * (self.inner / self.outer).ln()).exp() };
        let u: f64 = rng.random();
        let r = self.outer * (ratio_d + u * (1.0 - ratio_d)).powf(1.0 / d);
        r.clamp(self.inner, self.outer)
    }
}

/// Log-density of the uniform annulus at `x`; `-inf` outside the support.
pub fn annulus_log_density(spec: &AnnulusSpec, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), spec.dim);
    spec.log_density_at_radius(norm2(x))
}

/// A direction uniform on the sphere times a radius with density `~ r^{d-1}`.
pub fn sample_annulus_point(spec: &AnnulusSpec, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm2(&g);
        if n > 0.0 {
            let r = spec.sample_radius(rng);
            return g.into_iter().map(|v| v * r / n).collect();
        }
    }
}

pub fn sample_annulus(spec: &AnnulusSpec, n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    Ok((0..n).map(|_| sample_annulus_point(spec, rng)).collect())
}

/// Finite mixture of uniform annuli sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMixture {
    pub components: Vec<(f64, AnnulusSpec)>,
}

impl AnnulusMixture {
    pub fn new(components: Vec<(f64, AnnulusSpec)>) -> Self {
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim
    }

    pub fn log_density_at_radius(&self, r: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, s)| w.ln() + s.log_density_at_radius(r))
            .collect();
        logsumexp(&terms)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_at_radius(norm2(x))
    }

    /// Picks a component by weight, then samples it. Returns the component index.
    pub fn sample(&self, rng: &mut Rng) -> (usize, Vec<f64>) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.components.len() - 1;
        for (i, (w, _)) in self.components.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        while self.components[k].0 <= 0.0 && k > 0 {
            k -= 1;
        }
        (k, sample_annulus_point(&self.components[k].1, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn density_values() {
        let seg = AnnulusSpec::new(0.0, 1.0, 1).unwrap();
        assert!((annulus_log_density(&seg, &[0.3]) + LN_2).abs() < 1e-14);
        let disk = AnnulusSpec::new(0.0, 1.0, 2).unwrap();
        assert!((annulus_log_density(&disk, &[0.2, -0.5]) + PI.ln()).abs() < 1e-14);
        let ring = AnnulusSpec::new(1.0, 2.0, 2).unwrap();
        assert!((annulus_log_density(&ring, &[1.5, 0.0]) + (3.0 * PI).ln()).abs() < 1e-14);
        assert_eq!(annulus_log_density(&ring, &[0.5, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn high_dimensional_volume_is_finite() {
        let s = AnnulusSpec::new(1.0, 1.3, 400).unwrap();
        assert!(s.ln_volume().is_finite());
    }

    #[test]
    fn thin_shell_radii() {
        let s = AnnulusSpec::new(1.0, 1.0 + 1e-9, 5).unwrap();
        let mut rng = seeded(1);
        for x in sample_annulus(&s, 100, &mut rng).unwrap() {
            assert!((norm2(&x) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn disk_area_ratio() {
        let s = AnnulusSpec::ball(1.0, 2).unwrap();
        let mut rng = seeded(2);
        let pts = sample_annulus(&s, 100_000, &mut rng).unwrap();
        let frac = pts.iter().filter(|x| norm2(x) <= 0.5).count() as f64 / pts.len() as f64;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn high_dimensional_mass_near_surface() {
        let s = AnnulusSpec::ball(1.0, 20).unwrap();
        let mut rng = seeded(3);
        let pts = sample_annulus(&s, 10_000, &mut rng).unwrap();
        let frac = pts.iter().filter(|x| norm2(x) > 0.9).count() as f64 / pts.len() as f64;
        assert!(frac > 0.85, "{frac}");
    }

    #[test]
    fn samples_stay_in_support() {
        let s = AnnulusSpec::new(2.0, 3.0, 7).unwrap();
        let mut rng = seeded(4);
        for x in sample_annulus(&s, 2000, &mut rng).unwrap() {
            let r = norm2(&x);
            assert!((2.0 - 1e-12..=3.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn disk_density_integrates_to_one() {
        let s = AnnulusSpec::new(0.5, 1.5, 2).unwrap();
        let n = 800;
        let h = 3.2 / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [-1.6 + (i as f64 + 0.5) * h, -1.6 + (j as f64 + 0.5) * h];
                mass += annulus_log_density(&s, &x).exp() * h * h;
            }
        }
        assert!((mass - 1.0).abs() < 0.01, "{mass}");
    }
}
