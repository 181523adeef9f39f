//! Experiment runners behind the CLI. Each produces an in-memory result with a
//! CSV rendering; [`OutputDir`] writes the files and the manifest.

mod config;
mod histogram;
mod interpolation;
mod manifest;
mod verify;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use config::{
    AnnuliConfig, AttackEntry, AttackSuiteConfig, BlobsConfig, DataConfig, DataKind, ExperimentConfig, InterpolationConfig,
    SweepConfig, VerifyConfig,
};
pub use histogram::{run_wrongclass_histogram, WrongClassHistogram, WrongClassRow, WrongClassSummary, WRONGCLASS_HEADER};
pub use interpolation::{run_interpolation, InterpolationPoint, InterpolationResult, InterpolationSummary, INTERPOLATION_HEADER};
pub use manifest::{Artifact, Manifest, OutputDir, CSV_SCHEMAS, MANIFEST_FILE, MANIFEST_SCHEMA};
pub use verify::{run_verify, McCheck, VerifyOutput, VERIFY_HEADER};

use crate::attacks::{evaluate_attack_suite, AttackConfig, AttackKind, SuiteRow, ATTACK_TABLE_HEADER};
use crate::datagen::{Dataset, Sample};
use crate::error::Result;
use crate::flow::FlowModel;
use crate::training::{
    accuracy, bits_per_dim, calibrate_threshold, joint_nll, score_all, train, DetectionThreshold, EpochMetrics, TrainOutcome,
};

/// Builds a fresh model for `dataset` and trains it on the training split.
pub fn train_model(config: &ExperimentConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    let model = FlowModel::new(&config.flow_for(dataset.dim, dataset.classes))?;
    train(model, dataset, &config.objective, &config.train_config())
}

/// Detection threshold calibrated on the held-out split.
pub fn calibrate(config: &ExperimentConfig, model: &FlowModel, dataset: &Dataset) -> Result<DetectionThreshold> {
    calibrate_threshold(model, &dataset.test_samples(), config.quantile, "test")
}

pub const EVAL_HEADER: &str = "split,n,accuracy,nll_joint,nll_generative,nll_discriminative,bits_per_dim,threshold,frac_in_dist";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub split: String,
    pub n: usize,
    pub accuracy: f64,
    pub nll_joint: f64,
    pub nll_generative: f64,
    pub nll_discriminative: f64,
    pub bits_per_dim: f64,
    pub threshold: f64,
    /// Fraction of the split at or below the detection threshold.
    pub frac_in_dist: f64,
}

pub fn evaluate_split(model: &FlowModel, split: &str, samples: &[Sample], threshold: &DetectionThreshold) -> Result<EvalRow> {
    let dec = joint_nll(model, samples)?;
    let scores = score_all(model, samples)?;
    let in_dist = scores.iter().filter(|s| !threshold.is_outlier_nll(s.nll())).count();
    Ok(EvalRow {
        split: split.to_string(),
        n: samples.len(),
        accuracy: accuracy(model, samples)?,
        nll_joint: dec.total,
        nll_generative: dec.generative,
        nll_discriminative: dec.discriminative,
        bits_per_dim: bits_per_dim(dec.generative, model.dim),
        threshold: threshold.value,
        frac_in_dist: in_dist as f64 / samples.len() as f64,
    })
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.split, r.n, r.accuracy, r.nll_joint, r.nll_generative, r.nll_discriminative, r.bits_per_dim, r.threshold, r.frac_in_dist
        );
    }
    out
}

pub const ATTACK_EVAL_HEADER: &str =
    "dataset,objective,model_seed,quantile,threshold,attack,detect_aware,n,pct_success,pct_success_undetected,mean_norm,mean_queries";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEval {
    pub dataset: String,
    pub objective: String,
    pub model_seed: u64,
    pub threshold: DetectionThreshold,
    pub rows: Vec<SuiteRow>,
}

impl AttackEval {
    pub fn row(&self, kind: AttackKind, detect_aware: bool) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.attack == kind && r.detect_aware == detect_aware)
    }

    pub fn to_csv(&self) -> String {
        debug_assert!(ATTACK_EVAL_HEADER.ends_with(ATTACK_TABLE_HEADER));
        let mut out = String::from(ATTACK_EVAL_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{}",
                self.dataset,
                self.objective,
                self.model_seed,
                self.threshold.quantile,
                self.threshold.value,
                r.csv_line()
            );
        }
        out
    }
}

/// Runs the attack suite on the held-out split. With `data_box` set, every
/// attack is confined to the per-dimension range of the dataset.
pub fn run_attack_eval(
    model: &FlowModel,
    dataset: &Dataset,
    threshold: &DetectionThreshold,
    suite: &AttackSuiteConfig,
    objective: &str,
) -> Result<AttackEval> {
    let (lo, hi) = dataset.bounds();
    let configs: Vec<(AttackKind, AttackConfig)> = suite
        .attacks
        .iter()
        .map(|a| {
            let cfg = if suite.data_box && a.config.lower.is_none() && a.config.upper.is_none() {
                a.config.clone().with_bounds(lo.clone(), hi.clone())
            } else {
                a.config.clone()
            };
            (a.kind, cfg)
        })
        .collect();
    for (_, c) in &configs {
        c.validate(model.dim)?;
    }
    let rows = evaluate_attack_suite(model, &dataset.test_samples(), threshold, &configs, suite.max_samples)?;
    Ok(AttackEval {
        dataset: dataset.meta.kind.clone(),
        objective: objective.to_string(),
        model_seed: model.seed,
        threshold: threshold.clone(),
        rows,
    })
}

pub const SWEEP_HEADER: &str = "sigma_b,accuracy,bits_per_dim,interpolation_fraction,status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma_b: f64,
    pub accuracy: f64,
    pub bits_per_dim: f64,
    pub interpolation_fraction: f64,
    /// `ok`, or the error that stopped this point.
    pub status: String,
    #[serde(skip)]
    pub metrics: Vec<EpochMetrics>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let status = r.status.replace([',', '\n'], ";");
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{status}", r.sigma_b, r.accuracy, r.bits_per_dim, r.interpolation_fraction);
    }
    out
}

/// Sweep row for a model already trained on `dataset`.
pub fn sweep_row(config: &ExperimentConfig, dataset: &Dataset, outcome: TrainOutcome) -> Result<SweepRow> {
    let model = &outcome.model;
    let threshold = calibrate(config, model, dataset)?;
    let test = dataset.test_samples();
    let dec = joint_nll(model, &test)?;
    let interp = run_interpolation(model, &test, &threshold, config.interpolation.pairs, config.interpolation.alphas, config.seed)?;
    Ok(SweepRow {
        sigma_b: config.data.glyph.blur,
        accuracy: accuracy(model, &test)?,
        bits_per_dim: bits_per_dim(dec.generative, dataset.dim),
        interpolation_fraction: interp.summary.fraction_fully_in_distribution,
        status: "ok".to_string(),
        metrics: outcome.metrics,
    })
}

fn sweep_point(config: &ExperimentConfig) -> Result<SweepRow> {
    let ds = config.data.build(config.seed)?;
    let outcome = train_model(config, &ds)?;
    sweep_row(config, &ds, outcome)
}

/// Trains one glyph model per blur bandwidth with the same seed. A failing
/// point is recorded in its row and the sweep moves on.
pub fn run_entropy_sweep(config: &ExperimentConfig) -> Vec<SweepRow> {
    config
        .sweep
        .blurs
        .iter()
        .map(|&blur| {
            let mut point = config.clone();
            point.data.kind = DataKind::Glyph;
            point.data.glyph.blur = blur;
            sweep_point(&point).unwrap_or_else(|e| SweepRow {
                sigma_b: blur,
                accuracy: f64::NAN,
                bits_per_dim: f64::NAN,
                interpolation_fraction: f64::NAN,
                status: e.to_string(),
                metrics: Vec::new(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{GmmPrior, Prior};
    use crate::training::calibrate_threshold;

    /// Identity flow over two well separated unit Gaussians.
    fn two_gaussians() -> (FlowModel, Vec<Sample>) {
        let prior = Prior::Gmm(GmmPrior::new(vec![vec![-3.0, 0.0], vec![3.0, 0.0]], vec![vec![0.0; 2]; 2]));
        let model = FlowModel::from_parts(2, vec![], prior, 0).unwrap();
        let samples = (0..40)
            .map(|i| {
                let y = i % 2;
                let sign = if y == 0 { -1.0 } else { 1.0 };
                Sample { x: vec![sign * 3.0 + 0.05 * (i as f64 - 20.0) / 20.0, 0.1 * ((i * 7) % 5) as f64 - 0.2], y }
            })
            .collect();
        (model, samples)
    }

    #[test]
    fn endpoints_only_are_always_in_distribution() {
        let (model, samples) = two_gaussians();
        let thr = calibrate_threshold(&model, &samples, 0.9, "all").unwrap();
        let r = run_interpolation(&model, &samples, &thr, 25, 2, 1).unwrap();
        assert_eq!(r.summary.fraction_fully_in_distribution, 1.0);
        assert_eq!(r.curve.len(), 2);
        assert!(r.to_csv().starts_with(INTERPOLATION_HEADER));
    }

    #[test]
    fn separated_modes_have_a_likelihood_valley() {
        let (model, samples) = two_gaussians();
        let thr = calibrate_threshold(&model, &samples, 0.99, "all").unwrap();
        let r = run_interpolation(&model, &samples, &thr, 30, 11, 2).unwrap();
        assert_eq!(r.summary.fraction_fully_in_distribution, 0.0);
        assert!(r.summary.interior_mean_nll > r.summary.endpoint_mean_nll);
        // Posterior of the start class falls along the path.
        assert!(r.curve[0].mean_post_start > 0.99 && r.curve[10].mean_post_start < 0.01);
    }

    #[test]
    fn single_class_endpoints_are_an_error() {
        let (model, samples) = two_gaussians();
        let one_class: Vec<Sample> = samples.into_iter().filter(|s| s.y == 0).collect();
        let thr = calibrate_threshold(&model, &one_class, 0.9, "all").unwrap();
        assert!(matches!(run_interpolation(&model, &one_class, &thr, 5, 3, 0), Err(crate::Error::InsufficientData(_))));
    }

    #[test]
    fn two_class_histogram_uses_the_other_class() {
        let (model, samples) = two_gaussians();
        let h = run_wrongclass_histogram(&model, &samples).unwrap();
        assert!(h.rows.iter().all(|r| r.y_wrong == 1 - r.y_true));
        assert!(h.summary.median_gap > 0.0 && h.summary.accuracy == 1.0);
        assert_eq!(h.to_csv().lines().count(), samples.len() + 1);
    }

    #[test]
    fn verify_report_is_consistent() {
        let v = run_verify(0.1, 0.01, 0.3, 3000, 5000, 3).unwrap();
        assert_eq!(v.solution.dim, 54);
        assert!(v.lambda1_in_interval());
        assert!(v.to_csv().starts_with(VERIFY_HEADER));
        let wide = run_verify(0.1, 0.01, 10.0, 1000, 2000, 3).unwrap();
        assert!(wide.solution.dim < 10, "shell 10 opens the interval at d = {}", wide.solution.dim);
        assert!(wide.lambda1_in_interval());
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let mut cfg = ExperimentConfig::preset("glyph").unwrap();
        cfg.data.n = 120;
        cfg.train.epochs = 1;
        cfg.flow.blocks = 1;
        cfg.interpolation.pairs = 5;
        cfg.sweep.blurs = vec![-1.0, 0.0];
        let rows = run_entropy_sweep(&cfg);
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0].status, "ok");
        assert!(rows[0].accuracy.is_nan());
        assert_eq!(rows[1].status, "ok");
        assert_eq!(sweep_csv(&rows).lines().count(), 3);
    }

    #[test]
    fn presets_validate() {
        for name in config::PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("mnist").is_err());
    }
}
