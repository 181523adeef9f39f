use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::{mc_kl, solve_dimension, verify_proposition, DimensionSolution, KlDirection, PropositionReport};
use crate::rng::derived;

pub const VERIFY_HEADER: &str = "quantity,value";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
}

impl McCheck {
    /// Closed form within three standard errors of the estimate.
    pub fn agrees(&self) -> bool {
        (self.closed_form - self.estimate).abs() <= 3.0 * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub solution: DimensionSolution,
    pub report: PropositionReport,
    pub mc_q_p: McCheck,
    pub mc_p_q: McCheck,
}

pub fn run_verify(epsilon: f64, delta: f64, shell: f64, n_samples: usize, mc_samples: usize, seed: u64) -> Result<VerifyOutput> {
    let solution = solve_dimension(epsilon, delta, shell)?;
    let params = solution.params;
    let report = verify_proposition(&params, n_samples, &mut derived(seed, 0))?;
    let (qp, qp_se) = mc_kl(&params, KlDirection::QP, mc_samples, &mut derived(seed, 1))?;
    let (pq, pq_se) = mc_kl(&params, KlDirection::PQ, mc_samples, &mut derived(seed, 2))?;
    Ok(VerifyOutput {
        mc_q_p: McCheck { closed_form: solution.kl_q_p, estimate: qp, std_error: qp_se },
        mc_p_q: McCheck { closed_form: solution.kl_p_q, estimate: pq, std_error: pq_se },
        solution,
        report,
    })
}

impl VerifyOutput {
    pub fn lambda1_in_interval(&self) -> bool {
        let (lo, hi) = self.solution.lambda1_interval;
        lo < self.solution.params.lambda1 && self.solution.params.lambda1 < hi
    }

    pub fn passes(&self) -> bool {
        self.report.passes && self.report.condition6 && self.mc_q_p.agrees() && self.mc_p_q.agrees()
    }

    pub fn to_csv(&self) -> String {
        let s = &self.solution;
        let r = &self.report;
        let rows: [(&str, String); 20] = [
            ("epsilon", format!("{}", s.params.epsilon)),
            ("delta", format!("{}", s.params.delta)),
            ("shell", format!("{}", s.params.shell)),
            ("dim", s.dim.to_string()),
            ("lambda1", format!("{:.9e}", s.params.lambda1)),
            ("lambda2", format!("{:.9e}", s.params.lambda2)),
            ("lambda1_lo", format!("{:.9e}", s.lambda1_interval.0)),
            ("lambda1_hi", format!("{:.9e}", s.lambda1_interval.1)),
            ("kl_q_p", format!("{:.9e}", s.kl_q_p)),
            ("kl_p_q", format!("{:.9e}", s.kl_p_q)),
            ("mc_kl_q_p", format!("{:.9e}", self.mc_q_p.estimate)),
            ("mc_kl_q_p_se", format!("{:.9e}", self.mc_q_p.std_error)),
            ("mc_kl_p_q", format!("{:.9e}", self.mc_p_q.estimate)),
            ("mc_kl_p_q_se", format!("{:.9e}", self.mc_p_q.std_error)),
            ("samples", r.n.to_string()),
            ("attack_fraction", format!("{:.6}", r.fraction)),
            ("wilson_lo", format!("{:.6}", r.wilson.0)),
            ("wilson_hi", format!("{:.6}", r.wilson.1)),
            ("max_ball_mass", format!("{:.6e}", r.max_ball_mass)),
            ("pass", self.passes().to_string()),
        ];
        let mut out = String::from(VERIFY_HEADER);
        out.push('\n');
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn to_text(&self) -> String {
        let s = &self.solution;
        let mut out = String::new();
        let _ = writeln!(out, "solver: d={} lambda1 interval ({:.6e}, {:.6e})", s.dim, s.lambda1_interval.0, s.lambda1_interval.1);
        out.push_str(&self.report.to_text());
        for (name, m) in [("KL(q||p)", &self.mc_q_p), ("KL(p||q)", &self.mc_p_q)] {
            let _ = writeln!(
                out,
                "  MC {name}: {:.6e} +- {:.2e} (closed form {:.6e}) -> {}",
                m.estimate,
                m.std_error,
                m.closed_form,
                if m.agrees() { "agrees" } else { "DISAGREES" }
            );
        }
        let _ = writeln!(out, "overall: {}", if self.passes() { "PASS" } else { "FAIL" });
        out
    }
}
