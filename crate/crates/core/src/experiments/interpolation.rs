use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::datagen::{interpolate, Sample};
use crate::error::{invalid, Error, Result};
use crate::flow::FlowModel;
use crate::par::map_ordered;
use crate::rng::seeded;
use crate::training::{score, score_all, DetectionThreshold};

pub const INTERPOLATION_HEADER: &str = "alpha,mean_nll,mean_post_start,mean_post_end,frac_in_dist";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPoint {
    pub alpha: f64,
    pub mean_nll: f64,
    /// Mean posterior of the start point's class.
    pub mean_post_start: f64,
    pub mean_post_end: f64,
    /// Fraction of pairs whose intermediate at this alpha is in-distribution.
    pub frac_in_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSummary {
    pub pairs: usize,
    pub alphas: usize,
    pub eligible_endpoints: usize,
    /// Pairs whose every intermediate stays at or below the threshold.
    pub fraction_fully_in_distribution: f64,
    pub endpoint_mean_nll: f64,
    pub interior_mean_nll: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub curve: Vec<InterpolationPoint>,
    pub summary: InterpolationSummary,
}

impl InterpolationResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(INTERPOLATION_HEADER);
        out.push('\n');
        for p in &self.curve {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6}",
                p.alpha, p.mean_nll, p.mean_post_start, p.mean_post_end, p.frac_in_dist
            );
        }
        out
    }
}

/// Linear interpolation between correctly classified, in-distribution
/// endpoints of different classes, on a uniform grid of `n_alphas` points in
/// `[0, 1]`.
pub fn run_interpolation(
    model: &FlowModel,
    samples: &[Sample],
    threshold: &DetectionThreshold,
    n_pairs: usize,
    n_alphas: usize,
    seed: u64,
) -> Result<InterpolationResult> {
    if n_alphas < 2 || n_pairs == 0 {
        return Err(invalid("need at least 2 alphas and 1 pair"));
    }
    let scores = score_all(model, samples)?;
    let eligible: Vec<usize> = (0..samples.len())
        .filter(|&i| scores[i].predicted() == samples[i].y && !threshold.is_outlier_nll(scores[i].nll()))
        .collect();
    let classes = eligible.iter().map(|&i| samples[i].y).fold(Vec::new(), |mut acc, y| {
        if !acc.contains(&y) {
            acc.push(y);
        }
        acc
    });
    if classes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} eligible endpoints covering {} class(es); need two classes",
            eligible.len(),
            classes.len()
        )));
    }

    let mut rng = seeded(seed);
    let pairs: Vec<(usize, usize)> = (0..n_pairs)
        .map(|_| {
            let i = eligible[rng.random_range(0..eligible.len())];
            let others: Vec<usize> = eligible.iter().copied().filter(|&j| samples[j].y != samples[i].y).collect();
            (i, others[rng.random_range(0..others.len())])
        })
        .collect();
    let alphas: Vec<f64> = (0..n_alphas).map(|m| m as f64 / (n_alphas - 1) as f64).collect();

    // One row per pair: (nll, post_start, post_end) at every alpha.
    let rows: Vec<Result<Vec<(f64, f64, f64)>>> = map_ordered(pairs.len(), |k| {
        let (i, j) = pairs[k];
        let (a, b) = (&samples[i], &samples[j]);
        alphas
            .iter()
            .map(|&alpha| {
                let sc = score(model, &interpolate(&a.x, &b.x, alpha)?)?;
                Ok((sc.nll(), sc.posterior[a.y], sc.posterior[b.y]))
            })
            .collect()
    });
    let rows: Vec<Vec<(f64, f64, f64)>> = rows.into_iter().collect::<Result<_>>()?;

    let n = rows.len() as f64;
    let curve = alphas
        .iter()
        .enumerate()
        .map(|(m, &alpha)| {
            let col = rows.iter().map(|r| r[m]);
            InterpolationPoint {
                alpha,
                mean_nll: col.clone().map(|v| v.0).sum::<f64>() / n,
                mean_post_start: col.clone().map(|v| v.1).sum::<f64>() / n,
                mean_post_end: col.clone().map(|v| v.2).sum::<f64>() / n,
                frac_in_dist: col.filter(|v| !threshold.is_outlier_nll(v.0)).count() as f64 / n,
            }
        })
        .collect::<Vec<_>>();

    let full = rows.iter().filter(|r| r.iter().all(|v| !threshold.is_outlier_nll(v.0))).count();
    let endpoint_mean_nll = 0.5 * (curve[0].mean_nll + curve[n_alphas - 1].mean_nll);
    let interior = &curve[1..n_alphas - 1];
    let interior_mean_nll = if interior.is_empty() {
        f64::NAN
    } else {
        interior.iter().map(|p| p.mean_nll).sum::<f64>() / interior.len() as f64
    };
    Ok(InterpolationResult {
        curve,
        summary: InterpolationSummary {
            pairs: rows.len(),
            alphas: n_alphas,
            eligible_endpoints: eligible.len(),
            fraction_fully_in_distribution: full as f64 / n,
            endpoint_mean_nll,
            interior_mean_nll,
            threshold: threshold.value,
        },
    })
}
