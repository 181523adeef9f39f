use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackKind};
use crate::datagen::{default_glyphs, make_annuli_dataset, make_blobs, make_glyph_bg, Dataset, GlyphBGSpec};
use crate::error::{invalid, Result};
use crate::flow::{FlowConfig, PriorConfig};
use crate::oracle::CounterexampleParams;
use crate::rng::{derive_seed, seeded};
use crate::training::{ObjectiveSpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Annuli,
    Blobs,
    Glyph,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnuliConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub shell: f64,
    pub dim: usize,
}

impl Default for AnnuliConfig {
    fn default() -> Self {
        Self { lambda1: 0.05, lambda2: 0.5, shell: 1.0, dim: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobsConfig {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self { classes: 2, dim: 2, separation: 2.0, sigma: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub kind: DataKind,
    pub n: usize,
    pub test_fraction: f64,
    /// Dataset file, for `kind = "file"` and as the `gen-data` output name.
    pub path: Option<PathBuf>,
    pub annuli: AnnuliConfig,
    pub blobs: BlobsConfig,
    pub glyph: GlyphBGSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: DataKind::Blobs,
            n: 2000,
            test_fraction: 0.25,
            path: None,
            annuli: AnnuliConfig::default(),
            blobs: BlobsConfig::default(),
            glyph: GlyphBGSpec::default(),
        }
    }
}

impl DataConfig {
    /// Generates (or loads) the dataset and applies the train/test split.
    pub fn build(&self, seed: u64) -> Result<Dataset> {
        let data_seed = derive_seed(seed, 1);
        let mut rng = seeded(data_seed);
        let ds = match self.kind {
            DataKind::Annuli => {
                let a = &self.annuli;
                let params = CounterexampleParams { lambda1: a.lambda1, lambda2: a.lambda2, shell: a.shell, dim: a.dim, epsilon: 1.0, delta: 0.25 };
                params.validate()?;
                make_annuli_dataset(&params, self.n, data_seed, &mut rng)?
            }
            DataKind::Blobs => {
                let b = &self.blobs;
                make_blobs(b.classes, b.dim, b.separation, b.sigma, self.n, data_seed, &mut rng)?
            }
            DataKind::Glyph => make_glyph_bg(&self.glyph, self.n, data_seed, &mut rng)?,
            DataKind::File => {
                let path = self.path.as_ref().ok_or_else(|| invalid("data.path is required for kind = \"file\""))?;
                let ds = Dataset::load(path)?;
                if ds.split.is_some() {
                    return Ok(ds);
                }
                ds
            }
        };
        ds.with_split(self.test_fraction, derive_seed(seed, 2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpolationConfig {
    pub pairs: usize,
    pub alphas: usize,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        Self { pairs: 100, alphas: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub kind: AttackKind,
    #[serde(default)]
    pub config: AttackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSuiteConfig {
    pub max_samples: usize,
    /// Use the dataset's per-dimension min/max as the attack box.
    pub data_box: bool,
    pub attacks: Vec<AttackEntry>,
}

impl Default for AttackSuiteConfig {
    fn default() -> Self {
        Self {
            max_samples: 100,
            data_box: true,
            attacks: vec![
                AttackEntry { kind: AttackKind::Gradient, config: AttackConfig::default() },
                AttackEntry { kind: AttackKind::Boundary, config: AttackConfig::default() },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub shell: f64,
    pub samples: usize,
    pub mc_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, delta: 0.01, shell: 0.3, samples: 100_000, mc_samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub blurs: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { blurs: vec![5.0, 1.0, 0.0] }
    }
}

/// Everything a CLI command needs; loaded from TOML with per-key overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Model file read by the consuming commands and written by `train`.
    pub model: Option<PathBuf>,
    pub quantile: f64,
    pub data: DataConfig,
    pub flow: FlowConfig,
    pub objective: ObjectiveSpec,
    pub train: TrainConfig,
    pub interpolation: InterpolationConfig,
    pub attack: AttackSuiteConfig,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            model: None,
            quantile: 0.99,
            data: DataConfig::default(),
            flow: FlowConfig { prior: PriorConfig::Gmm { radius: 6.0 }, ..FlowConfig::default() },
            objective: ObjectiveSpec::reweighted(),
            train: TrainConfig::default(),
            interpolation: InterpolationConfig::default(),
            attack: AttackSuiteConfig::default(),
            verify: VerifyConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(invalid("quantile must lie in (0, 1)"));
        }
        if self.interpolation.alphas < 2 || self.interpolation.pairs == 0 {
            return Err(invalid("interpolation needs at least 2 alphas and 1 pair"));
        }
        if self.data.n == 0 {
            return Err(invalid("data.n must be positive"));
        }
        if self.sweep.blurs.is_empty() {
            return Err(invalid("sweep.blurs must not be empty"));
        }
        self.train.validate()?;
        self.objective.validate()
    }

    /// Flow settings with data-dependent sizes filled in.
    pub fn flow_for(&self, dim: usize, classes: usize) -> FlowConfig {
        FlowConfig { dim, classes, seed: derive_seed(self.seed, 3), ..self.flow.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: derive_seed(self.seed, 4), ..self.train.clone() }
    }
}

/// Named starting points for the three synthetic datasets.
pub const PRESETS: [&str; 3] = ["blobs", "annuli", "glyph"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let with_budget = |budget: f64| AttackSuiteConfig {
            attacks: AttackSuiteConfig::default()
                .attacks
                .into_iter()
                .map(|a| AttackEntry { config: AttackConfig { budget, ..a.config }, ..a })
                .collect(),
            ..AttackSuiteConfig::default()
        };
        Ok(match name {
            "blobs" => Self {
                train: TrainConfig { epochs: 30, ..TrainConfig::default() },
                attack: with_budget(1.0),
                ..base
            },
            "annuli" => Self {
                data: DataConfig { kind: DataKind::Annuli, n: 3000, ..DataConfig::default() },
                flow: FlowConfig::default(),
                train: TrainConfig { epochs: 60, learning_rate: 3e-3, ..TrainConfig::default() },
                attack: with_budget(1.0),
                ..base
            },
            "glyph" => Self {
                data: DataConfig {
                    kind: DataKind::Glyph,
                    n: 6000,
                    glyph: GlyphBGSpec { width: 12, height: 12, glyphs: default_glyphs(12, 12), ..GlyphBGSpec::default() },
                    ..DataConfig::default()
                },
                flow: FlowConfig { hidden: vec![64], ..FlowConfig::default() },
                train: TrainConfig { epochs: 20, ..TrainConfig::default() },
                attack: with_budget(1.0),
                ..base
            },
            other => return Err(invalid(format!("unknown preset {other:?}; expected one of {PRESETS:?}"))),
        })
    }
}
