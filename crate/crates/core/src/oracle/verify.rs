use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::counterexample::{construct_adversarial, kl_p_q, kl_q_p, proof_conditions, CounterexampleParams, ProofConditions, Side};
use crate::error::{invalid, Result};
use crate::math::{dist2, median, norm2, wilson_interval};
use crate::rng::Rng;

pub const CONDITION_NAMES: [&str; 5] = [
    "confident_correct",
    "prediction_flipped",
    "confident_mistake",
    "within_budget",
    "above_median_density",
];

/// Relative slack on the confidence comparisons; `p(0|x_bar) = 1 - delta`
/// holds with equality for solver output.
const CONF_TOL: f64 = 1e-12;

pub const WILSON_Z: f64 = 1.96;

/// Largest Monte-Carlo probability of a `D`-ball accepted as "small".
pub const BALL_MASS_LIMIT: f64 = 0.01;

const BALL_CENTRES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub conditions: [bool; 5],
    pub adversarial: Option<Vec<f64>>,
}

impl SampleCheck {
    pub fn attacked(&self) -> bool {
        self.adversarial.is_some() && self.conditions.iter().all(|&c| c)
    }
}

fn decision(params: &CounterexampleParams, side: Side, r: f64) -> Option<(usize, [f64; 2])> {
    let post = params.posterior(side, r)?;
    Some((usize::from(post[1] > post[0]), post))
}

/// Evaluates the five per-sample conditions of the proposition for `(x, y)`,
/// attacking with the radial move when `x` lies in the shell.
pub fn check_sample(params: &CounterexampleParams, x: &[f64], y: usize, median_log_q: f64) -> SampleCheck {
    let mut conditions = [false; 5];
    let conf = (1.0 - params.delta) * (1.0 - CONF_TOL);
    let r = norm2(x);
    let (Some((yp, pp)), Some((yq, pq))) = (decision(params, Side::P, r), decision(params, Side::Q, r)) else {
        return SampleCheck { conditions, adversarial: None };
    };
    conditions[0] = yp == y && yq == y && pp[yp] >= conf && pq[yq] >= conf;
    let Ok(xb) = construct_adversarial(x, params.shell) else {
        return SampleCheck { conditions, adversarial: None };
    };
    let rb = norm2(&xb);
    if let (Some((ypb, ppb)), Some((yqb, pqb))) = (decision(params, Side::P, rb), decision(params, Side::Q, rb)) {
        conditions[1] = yqb != yq && ypb == yp;
        conditions[2] = pqb[ypb] <= params.delta * (1.0 + CONF_TOL) && ppb[ypb] >= conf;
    }
    conditions[3] = dist2(x, &xb) <= params.shell + super::counterexample::ETA * (1.0 + 1e-9);
    conditions[4] = params.log_marginal(Side::Q, rb) >= median_log_q;
    SampleCheck { conditions, adversarial: Some(xb) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub params: CounterexampleParams,
    pub proof_conditions: ProofConditions,
    pub feasible: bool,
    pub n: usize,
    pub attacked: usize,
    pub fraction: f64,
    pub wilson: (f64, f64),
    /// `(1 - l1) / 2`, the p-mass of class-0 shell points.
    pub expected_fraction: f64,
    pub condition_counts: [usize; 5],
    pub median_log_q: f64,
    pub kl_q_p: f64,
    pub kl_p_q: f64,
    /// Largest Monte-Carlo mass of a radius-`D` ball over the tested centres.
    pub max_ball_mass: f64,
    pub condition6: bool,
    pub passes: bool,
    /// A few `(x, y, x_bar)` triples that passed every condition.
    pub examples: Vec<(Vec<f64>, usize, Vec<f64>)>,
}

pub fn verify_proposition(params: &CounterexampleParams, n: usize, rng: &mut Rng) -> Result<PropositionReport> {
    params.validate()?;
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let samples: Vec<(Vec<f64>, usize)> = (0..n).map(|_| params.sample_p(rng)).collect();
    let log_q: Vec<f64> = samples.iter().map(|(x, _)| params.log_marginal(Side::Q, norm2(x))).collect();
    let median_log_q = median(&log_q);

    let mut counts = [0usize; 5];
    let mut attacked = 0;
    let mut examples = Vec::new();
    for (x, y) in &samples {
        let check = check_sample(params, x, *y, median_log_q);
        for (c, ok) in counts.iter_mut().zip(check.conditions) {
            *c += usize::from(ok);
        }
        if check.attacked() {
            attacked += 1;
            if examples.len() < 8 {
                examples.push((x.clone(), *y, check.adversarial.unwrap()));
            }
        }
    }

    let mut centres = vec![vec![0.0; params.dim]];
    centres.extend(samples.iter().take(BALL_CENTRES).map(|(x, _)| x.clone()));
    let max_ball_mass = centres
        .iter()
        .map(|c| samples.iter().filter(|(x, _)| dist2(x, c) <= params.shell).count() as f64 / n as f64)
        .fold(0.0, f64::max);

    let proof = proof_conditions(params);
    let feasible = proof.all();
    let wilson = wilson_interval(attacked, n, WILSON_Z);
    let condition6 = params.shell < 1.0 && max_ball_mass <= BALL_MASS_LIMIT;
    Ok(PropositionReport {
        params: *params,
        proof_conditions: proof,
        feasible,
        n,
        attacked,
        fraction: attacked as f64 / n as f64,
        wilson,
        expected_fraction: 0.5 * (1.0 - params.lambda1),
        condition_counts: counts,
        median_log_q,
        kl_q_p: kl_q_p(params),
        kl_p_q: kl_p_q(params),
        max_ball_mass,
        condition6,
        passes: feasible && wilson.0 > 1.0 / 3.0,
        examples,
    })
}

pub const CONDITIONS_HEADER: &str = "condition,passed,total,rate";

impl PropositionReport {
    pub fn conditions_csv(&self) -> String {
        let mut out = String::from(CONDITIONS_HEADER);
        out.push('\n');
        for (name, &c) in CONDITION_NAMES.iter().zip(&self.condition_counts) {
            let _ = writeln!(out, "{name},{c},{},{:.6}", self.n, c as f64 / self.n as f64);
        }
        let _ = writeln!(out, "all,{},{},{:.6}", self.attacked, self.n, self.fraction);
        out
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "counter-example verification");
        let _ = writeln!(s, "  epsilon={} delta={} shell={}", p.epsilon, p.delta, p.shell);
        let _ = writeln!(s, "  d={} lambda1={:.6e} lambda2={:.6e}", p.dim, p.lambda1, p.lambda2);
        let _ = writeln!(s, "  KL(q||p)={:.6e} KL(p||q)={:.6e}", self.kl_q_p, self.kl_p_q);
        let pc = self.proof_conditions.as_array();
        let _ = writeln!(s, "  parameter conditions: {}", pc.map(|b| if b { "ok" } else { "FAIL" }).join(" "));
        let _ = writeln!(s, "  feasible: {}", self.feasible);
        let _ = writeln!(s, "  samples: {}  attacked: {}", self.n, self.attacked);
        let _ = writeln!(s, "  fraction: {:.6}  (shell mass of class 0: {:.6})", self.fraction, self.expected_fraction);
        let _ = writeln!(s, "  wilson 95%: [{:.6}, {:.6}]  lower > 1/3: {}", self.wilson.0, self.wilson.1, self.wilson.0 > 1.0 / 3.0);
        for (i, (name, &c)) in CONDITION_NAMES.iter().zip(&self.condition_counts).enumerate() {
            let _ = writeln!(s, "  condition {}: {name} {:.6}", i + 1, c as f64 / self.n as f64);
        }
        let _ = writeln!(s, "  condition 6: max ball mass {:.3e} shell<1 {} -> {}", self.max_ball_mass, p.shell < 1.0, self.condition6);
        let _ = writeln!(s, "  result: {}", if self.passes { "PASS" } else { "FAIL" });
        s
    }
}
