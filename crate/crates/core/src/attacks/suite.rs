use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{boundary_attack, gradient_attack, judge, AttackConfig, AttackResult};
use crate::datagen::Sample;
use crate::error::Result;
use crate::flow::FlowModel;
use crate::par::map_ordered;
use crate::rng::derived;
use crate::training::DetectionThreshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Gradient,
    Boundary,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Gradient => "gradient",
            AttackKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub attack: AttackKind,
    pub detect_aware: bool,
    pub n: usize,
    pub pct_success: f64,
    pub pct_success_undetected: f64,
    /// Mean norm of the successful attacks; NaN when there are none.
    pub mean_norm: f64,
    pub mean_queries: f64,
}

pub const ATTACK_TABLE_HEADER: &str = "attack,detect_aware,n,pct_success,pct_success_undetected,mean_norm,mean_queries";

impl SuiteRow {
    pub fn from_results(attack: AttackKind, detect_aware: bool, results: &[AttackResult]) -> Self {
        let n = results.len();
        let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        let succ: Vec<&AttackResult> = results.iter().filter(|r| r.within_budget).collect();
        let mean_norm = if succ.is_empty() { f64::NAN } else { succ.iter().map(|r| r.norm).sum::<f64>() / succ.len() as f64 };
        Self {
            attack,
            detect_aware,
            n,
            pct_success: pct(succ.len()),
            pct_success_undetected: pct(results.iter().filter(|r| r.undetected_success()).count()),
            mean_norm,
            mean_queries: if n == 0 { 0.0 } else { results.iter().map(|r| r.queries as f64).sum::<f64>() / n as f64 },
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.2},{:.2},{:.6},{:.1}",
            self.attack.name(),
            self.detect_aware,
            self.n,
            self.pct_success,
            self.pct_success_undetected,
            self.mean_norm,
            self.mean_queries
        )
    }
}

pub fn suite_csv(rows: &[SuiteRow]) -> String {
    let mut out = String::from(ATTACK_TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

/// Indices of samples that are correctly classified and below the threshold.
pub fn eligible_indices(model: &FlowModel, samples: &[Sample], threshold: &DetectionThreshold) -> Result<Vec<usize>> {
    let ok = |s: &Sample| -> Result<bool> {
        let v = judge(model, threshold, &s.x)?;
        Ok(v.predicted == s.y && !v.detected)
    };
    #[cfg(feature = "parallel")]
    let flags: Vec<bool> = {
        use rayon::prelude::*;
        samples.par_iter().map(ok).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let flags: Vec<bool> = samples.iter().map(ok).collect::<Result<_>>()?;
    Ok(flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect())
}

/// Runs every configured attack twice (plain and detection-aware) on the first
/// `max_samples` eligible samples. Boundary attacks start from a random
/// eligible sample of a random other class.
pub fn evaluate_attack_suite(
    model: &FlowModel,
    samples: &[Sample],
    threshold: &DetectionThreshold,
    configs: &[(AttackKind, AttackConfig)],
    max_samples: usize,
) -> Result<Vec<SuiteRow>> {
    let eligible = eligible_indices(model, samples, threshold)?;
    let targets = &eligible[..eligible.len().min(max_samples)];
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); model.classes];
    for &i in &eligible {
        by_class[samples[i].y].push(i);
    }
    let mut rows = Vec::new();
    for (kind, base) in configs {
        for detect_aware in [false, true] {
            let config = AttackConfig { detect_aware, ..base.clone() };
            let results: Vec<AttackResult> = map_ordered(targets.len(), |k| {
                let s = &samples[targets[k]];
                let seed = crate::rng::derive_seed(config.seed, targets[k] as u64);
                let cfg = AttackConfig { seed, ..config.clone() };
                let outcome = match kind {
                    AttackKind::Gradient => gradient_attack(model, &s.x, s.y, threshold, &cfg),
                    AttackKind::Boundary => {
                        let mut rng = derived(seed, 1);
                        let others: Vec<usize> = (0..model.classes).filter(|&c| c != s.y && !by_class[c].is_empty()).collect();
                        if others.is_empty() {
                            return failure(&s.x);
                        }
                        let target = others[rng.random_range(0..others.len())];
                        let pool = &by_class[target];
                        let init = &samples[pool[rng.random_range(0..pool.len())]].x;
                        boundary_attack(model, &s.x, s.y, target, init, threshold, &cfg)
                    }
                };
                outcome.unwrap_or_else(|_| failure(&s.x))
            });
            rows.push(SuiteRow::from_results(*kind, detect_aware, &results));
        }
    }
    Ok(rows)
}

fn failure(x: &[f64]) -> AttackResult {
    AttackResult {
        x_adv: x.to_vec(),
        success: false,
        detected: false,
        norm: 0.0,
        within_budget: false,
        iterations: 0,
        queries: 0,
        trace: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{GmmPrior, Prior};

    #[test]
    fn zero_budget_means_no_success() {
        let prior = Prior::Gmm(GmmPrior { means: vec![vec![-2.0, 0.0], vec![2.0, 0.0]], log_stds: vec![vec![0.0; 2]; 2] });
        let model = FlowModel::from_parts(2, vec![], prior, 0).unwrap();
        let samples: Vec<Sample> =
            (0..6).map(|i| Sample { x: vec![if i % 2 == 0 { -2.0 } else { 2.0 }, 0.1 * i as f64], y: i % 2 }).collect();
        let thr = DetectionThreshold { value: 1e9, quantile: 0.5, calibration_set: "t".into(), calibration_size: 6 };
        let cfg = AttackConfig { budget: 0.0, max_queries: 200, iterations: 20, binary_steps: 2, ..Default::default() };
        let rows = evaluate_attack_suite(&model, &samples, &thr, &[(AttackKind::Gradient, cfg.clone()), (AttackKind::Boundary, cfg)], 6).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.n, 6);
            assert_eq!(r.pct_success, 0.0);
            assert_eq!(r.pct_success_undetected, 0.0);
        }
        let csv = suite_csv(&rows);
        assert!(csv.starts_with(ATTACK_TABLE_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }
}
