use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST_SCHEMA: &str = "condflow.manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Versioned CSV schemas written by the runners, with their header rows.
pub const CSV_SCHEMAS: [(&str, &str); 8] = [
    ("condflow.metrics/1", crate::training::METRICS_HEADER),
    ("condflow.eval/1", super::EVAL_HEADER),
    ("condflow.interpolation/1", super::INTERPOLATION_HEADER),
    ("condflow.wrongclass/1", super::WRONGCLASS_HEADER),
    ("condflow.attacks/1", super::ATTACK_EVAL_HEADER),
    ("condflow.verify/1", super::VERIFY_HEADER),
    ("condflow.conditions/1", crate::oracle::CONDITIONS_HEADER),
    ("condflow.sweep/1", super::SWEEP_HEADER),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub command: String,
    pub schema: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub csv_schemas: Vec<(String, String)>,
    pub artifacts: Vec<Artifact>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            csv_schemas: CSV_SCHEMAS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            artifacts: Vec::new(),
        }
    }
}

/// Writes artifacts under one directory and keeps `manifest.json` in sync.
/// Re-running a command replaces its entries in place.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    command: String,
    seed: u64,
    manifest: Manifest,
}

impl OutputDir {
    pub fn open(root: impl AsRef<Path>, command: &str, seed: u64) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let path = root.join(MANIFEST_FILE);
        let mut manifest = if path.exists() {
            serde_json::from_str::<Manifest>(&fs::read_to_string(&path)?).unwrap_or_default()
        } else {
            Manifest::default()
        };
        manifest.schema = MANIFEST_SCHEMA.to_string();
        manifest.csv_schemas = Manifest::default().csv_schemas;
        Ok(Self { root, command: command.to_string(), seed, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records a file that was written by other means (e.g. a dataset sidecar).
    pub fn record(&mut self, name: &str, schema: &str) {
        let entry = Artifact { path: name.to_string(), command: self.command.clone(), schema: schema.to_string(), seed: self.seed };
        match self.manifest.artifacts.iter_mut().find(|a| a.path == name) {
            Some(a) => *a = entry,
            None => self.manifest.artifacts.push(entry),
        }
    }

    pub fn write(&mut self, name: &str, schema: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents)?;
        self.record(name, schema);
        Ok(path)
    }

    pub fn finish(self) -> Result<Manifest> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(self.manifest)
    }
}
