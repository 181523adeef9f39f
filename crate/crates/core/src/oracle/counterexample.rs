use serde::{Deserialize, Serialize};

use super::annulus::{AnnulusMixture, AnnulusSpec};
use crate::error::{invalid, Error, Result};
use crate::math::{norm2, softmax};
use crate::rng::{derived, Rng};

/// Parameters of the two-class annulus construction.
///
/// `p` is the data distribution and `q` the near-optimal model:
///
/// ```text
/// p(x|0) = l1 U(0,1) + (1-l1) U(1,1+D)      q(x|0) = U(0,1+D)
/// p(x|1) = l2 U(0,1) + (1-l2) U(2,3)        q(x|1) = p(x|1)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Shell width `D`, also the attacker's L2 budget.
    pub shell: f64,
    pub dim: usize,
    /// Target bound on both KL divergences.
    pub epsilon: f64,
    /// Confidence slack.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    P,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KlDirection {
    /// `KL(q || p)`, sampling from `q`.
    QP,
    /// `KL(p || q)`, sampling from `p`.
    PQ,
}

impl CounterexampleParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.lambda1) || !unit(self.lambda2) {
            return Err(invalid("mixture weights must lie in [0, 1]"));
        }
        if !(self.shell > 0.0 && self.shell.is_finite()) || self.dim == 0 {
            return Err(invalid("shell width must be positive and the dimension at least 1"));
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(invalid("need epsilon > 0 and delta in (0, 1/2)"));
        }
        Ok(())
    }

    /// `ln (1+D)^d`.
    pub fn ln_r(&self) -> f64 {
        self.dim as f64 * self.shell.ln_1p()
    }

    fn ball(&self, r: f64) -> AnnulusSpec {
        AnnulusSpec { inner: 0.0, outer: r, dim: self.dim }
    }

    fn shell_spec(&self) -> AnnulusSpec {
        AnnulusSpec { inner: 1.0, outer: 1.0 + self.shell, dim: self.dim }
    }

    fn far_spec(&self) -> AnnulusSpec {
        AnnulusSpec { inner: 2.0, outer: 3.0, dim: self.dim }
    }

    pub fn conditional(&self, side: Side, y: usize) -> AnnulusMixture {
        match (side, y) {
            (Side::P, 0) => AnnulusMixture::new(vec![(self.lambda1, self.ball(1.0)), (1.0 - self.lambda1, self.shell_spec())]),
            (Side::Q, 0) => AnnulusMixture::new(vec![(1.0, self.ball(1.0 + self.shell))]),
            _ => AnnulusMixture::new(vec![(self.lambda2, self.ball(1.0)), (1.0 - self.lambda2, self.far_spec())]),
        }
    }

    /// `[ln f(x|0), ln f(x|1)]` for a point at radius `r`.
    pub fn class_log_densities(&self, side: Side, r: f64) -> [f64; 2] {
        [self.conditional(side, 0).log_density_at_radius(r), self.conditional(side, 1).log_density_at_radius(r)]
    }

    /// Posterior over the two classes with `p(y) = 1/2`; `None` off the support.
    pub fn posterior(&self, side: Side, r: f64) -> Option<[f64; 2]> {
        let ll = self.class_log_densities(side, r);
        if ll.iter().all(|v| *v == f64::NEG_INFINITY) {
            return None;
        }
        let p = softmax(&ll);
        Some([p[0], p[1]])
    }

    pub fn log_marginal(&self, side: Side, r: f64) -> f64 {
        let [a, b] = self.class_log_densities(side, r);
        crate::math::logsumexp(&[a, b]) - std::f64::consts::LN_2
    }

    /// Draws `(x, y)` from `p(x, y)` with uniform labels.
    pub fn sample_p(&self, rng: &mut Rng) -> (Vec<f64>, usize) {
        use rand::Rng as _;
        let y = usize::from(rng.random::<bool>());
        let (_, x) = self.conditional(Side::P, y).sample(rng);
        (x, y)
    }
}

/// Closed forms `(p(0|x), q(0|x))` valid anywhere in the open unit ball.
pub fn posteriors_in_unit_ball(params: &CounterexampleParams) -> Result<(f64, f64)> {
    let (l1, l2) = (params.lambda1, params.lambda2);
    if l1 == 0.0 && l2 == 0.0 {
        return Err(Error::UndefinedPosterior("lambda1 = lambda2 = 0 puts no mass in the unit ball".into()));
    }
    let p0 = l1 / (l1 + l2);
    let q0 = if l2 == 0.0 { 1.0 } else { 1.0 / (1.0 + (l2.ln() + params.ln_r()).exp()) };
    Ok((p0, q0))
}

/// `ln(1 - 1/R)` from `ln R`, accurate when `R` is close to 1.
fn ln_one_minus_inv(ln_r: f64) -> f64 {
    (-(-ln_r).exp_m1()).ln()
}

/// Exact `KL(q(x|0) || p(x|0))`. Infinite when `l1` is 0 or 1.
pub fn kl_q_p(params: &CounterexampleParams) -> f64 {
    let l1 = params.lambda1;
    if l1 <= 0.0 || l1 >= 1.0 {
        return f64::INFINITY;
    }
    let ln_r = params.ln_r();
    let inv_r = (-ln_r).exp();
    let kl = -inv_r * (l1.ln() + ln_r) + (1.0 - inv_r) * (ln_one_minus_inv(ln_r) - (-l1).ln_1p());
    kl.max(0.0)
}

/// Exact `KL(p(x|0) || q(x|0))`; finite for every `l1` in `[0, 1]`.
pub fn kl_p_q(params: &CounterexampleParams) -> f64 {
    let l1 = params.lambda1;
    let ln_r = params.ln_r();
    let ball = if l1 > 0.0 { l1 * (l1.ln() + ln_r) } else { 0.0 };
    let shell = if l1 < 1.0 { (1.0 - l1) * ((-l1).ln_1p() - ln_one_minus_inv(ln_r)) } else { 0.0 };
    (ball + shell).max(0.0)
}

const MC_SHARD: usize = 1 << 15;

/// Plain Monte-Carlo estimate of the class-0 KL divergence and its standard
/// error. Shards are seeded from one draw of `rng` and combined in order.
pub fn mc_kl(params: &CounterexampleParams, direction: KlDirection, n: usize, rng: &mut Rng) -> Result<(f64, f64)> {
    use rand::RngCore as _;
    if n < 1000 {
        return Err(invalid("Monte-Carlo KL needs at least 1000 samples"));
    }
    let (from, to) = match direction {
        KlDirection::QP => (Side::Q, Side::P),
        KlDirection::PQ => (Side::P, Side::Q),
    };
    let source = params.conditional(from, 0);
    let target = params.conditional(to, 0);
    let base = rng.next_u64();
    let shards = n.div_ceil(MC_SHARD);
    let shard = |k: usize| -> (f64, f64, bool) {
        let mut r = derived(base, k as u64);
        let count = MC_SHARD.min(n - k * MC_SHARD);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let (_, x) = source.sample(&mut r);
            let radius = norm2(&x);
            let lt = target.log_density_at_radius(radius);
            if lt == f64::NEG_INFINITY {
                return (0.0, 0.0, true);
            }
            let v = source.log_density_at_radius(radius) - lt;
            s += v;
            s2 += v * v;
        }
        (s, s2, false)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, f64, bool)> = {
        use rayon::prelude::*;
        (0..shards).into_par_iter().map(shard).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, f64, bool)> = (0..shards).map(shard).collect();

    if parts.iter().any(|p| p.2) {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// The five sufficient conditions on `(l1, l2)` used in the existence proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofConditions {
    /// `l1 / (l1 + l2) >= 1 - delta`
    pub p_confident: bool,
    /// `1 / (1 + l2 R) <= delta`
    pub q_flips: bool,
    /// `l1 <= 1 - exp(-epsilon)`
    pub kl_qp: bool,
    /// `l1 > 1/R`
    pub ball_mass: bool,
    /// `l1 < epsilon / (d ln(1+D))`
    pub kl_pq: bool,
}

impl ProofConditions {
    pub fn all(&self) -> bool {
        self.as_array().iter().all(|&b| b)
    }

    pub fn as_array(&self) -> [bool; 5] {
        [self.p_confident, self.q_flips, self.kl_qp, self.ball_mass, self.kl_pq]
    }
}

/// Relative slack for the comparisons that the solver's `l2` choice makes
/// exact equalities.
const REL_TOL: f64 = 1e-12;

pub fn proof_conditions(params: &CounterexampleParams) -> ProofConditions {
    let (l1, e, dl) = (params.lambda1, params.epsilon, params.delta);
    let ln_r = params.ln_r();
    let (p0, q0) = posteriors_in_unit_ball(params).unwrap_or((f64::NAN, f64::NAN));
    ProofConditions {
        p_confident: p0 >= (1.0 - dl) * (1.0 - REL_TOL),
        q_flips: q0 <= dl * (1.0 + REL_TOL),
        kl_qp: l1 <= -(-e).exp_m1(),
        ball_mass: l1.ln() > -ln_r,
        kl_pq: l1 < e / ln_r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSolution {
    pub dim: usize,
    /// Open interval of admissible `l1`.
    pub lambda1_interval: (f64, f64),
    pub params: CounterexampleParams,
    pub conditions: ProofConditions,
    pub kl_q_p: f64,
    pub kl_p_q: f64,
}

const MAX_DIM: usize = 1_000_000;

/// Smallest `d` whose admissible `l1` interval is non-empty and whose midpoint
/// passes all five proof conditions on re-evaluation.
pub fn solve_dimension(epsilon: f64, delta: f64, shell: f64) -> Result<DimensionSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(delta > 0.0 && delta < 0.5) || !(shell > 0.0 && shell.is_finite()) {
        return Err(invalid("need epsilon > 0, 0 < delta < 1/2 and shell width > 0"));
    }
    let ln_odds2 = 2.0 * ((1.0 - delta) / delta).ln();
    let ln1p = shell.ln_1p();
    for d in 1..=MAX_DIM {
        let ln_r = d as f64 * ln1p;
        let hi = (epsilon / 2.0).min(epsilon / ln_r);
        let ln_lo = ln_odds2 - ln_r;
        if ln_lo >= hi.ln() {
            continue;
        }
        let lo = ln_lo.exp();
        let lambda1 = 0.5 * (lo + hi);
        let params = CounterexampleParams {
            lambda1,
            lambda2: lambda1 * delta / (1.0 - delta),
            shell,
            dim: d,
            epsilon,
            delta,
        };
        let conditions = proof_conditions(&params);
        let (kq, kp) = (kl_q_p(&params), kl_p_q(&params));
        if conditions.all() && kq < epsilon && kp < epsilon {
            return Ok(DimensionSolution { dim: d, lambda1_interval: (lo, hi), params, conditions, kl_q_p: kq, kl_p_q: kp });
        }
    }
    Err(invalid("no admissible dimension below the iteration cap"))
}

/// Interior offset that keeps the attacked point strictly inside the unit ball.
pub const ETA: f64 = 1e-6;

/// Moves a shell point radially to radius `1 - ETA`.
pub fn construct_adversarial(x: &[f64], shell: f64) -> Result<Vec<f64>> {
    let r = norm2(x);
    if !(1.0..=1.0 + shell).contains(&r) {
        return Err(invalid(format!("radius {r} is outside the shell [1, {}]", 1.0 + shell)));
    }
    let scale = (1.0 - ETA) / r;
    Ok(x.iter().map(|v| v * scale).collect())
}
