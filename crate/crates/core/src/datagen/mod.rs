//! Labelled synthetic datasets, their text format, and small utilities used by
//! the experiments (noise padding, interpolation).

mod generators;
mod glyph;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{seeded, Rng};

pub use generators::{make_annuli_dataset, make_blobs, simplex_means};
pub use glyph::{default_glyphs, gaussian_blur, make_glyph_bg, GlyphBGSpec, MaskClassifier};

pub const META_SCHEMA: &str = "condflow.dataset-meta/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: String,
    pub params: serde_json::Value,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
    pub split: Option<Split>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema: String,
    dim: usize,
    classes: usize,
    meta: DatasetMeta,
    split: Option<Split>,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize, samples: Vec<Sample>, meta: DatasetMeta) -> Result<Self> {
        let ds = Self { dim, classes, samples, meta, split: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            if s.x.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: s.x.len() });
            }
            if s.y >= self.classes {
                return Err(Error::InvalidClass { class: s.y, classes: self.classes });
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite sample value"));
            }
        }
        if let Some(split) = &self.split {
            let mut seen = vec![false; self.samples.len()];
            for &i in split.train.iter().chain(&split.test) {
                if i >= seen.len() || seen[i] {
                    return Err(invalid("split indices must be disjoint and in range"));
                }
                seen[i] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(invalid("split indices must cover the dataset"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Random train/test split; `test_fraction` of the samples go to the test side.
    pub fn with_split(mut self, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(invalid("test fraction must lie in [0, 1)"));
        }
        let mut idx: Vec<usize> = (0..self.samples.len()).collect();
        idx.shuffle(&mut seeded(seed));
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        let test = idx.split_off(idx.len() - n_test);
        self.split = Some(Split { train: idx, test });
        Ok(self)
    }

    fn pick(&self, idx: &[usize]) -> Vec<Sample> {
        idx.iter().map(|&i| self.samples[i].clone()).collect()
    }

    /// Training side of the split, or every sample when unsplit.
    pub fn train_samples(&self) -> Vec<Sample> {
        match &self.split {
            Some(s) => self.pick(&s.train),
            None => self.samples.clone(),
        }
    }

    /// Test side of the split, or every sample when unsplit.
    pub fn test_samples(&self) -> Vec<Sample> {
        match &self.split {
            Some(s) => self.pick(&s.test),
            None => self.samples.clone(),
        }
    }

    /// Per-dimension `(min, max)` over all samples.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for s in &self.samples {
            for (j, &v) in s.x.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        (lo, hi)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("D={} C={}\n", self.dim, self.classes);
        for s in &self.samples {
            let _ = write!(out, "{}", s.y);
            for v in &s.x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, meta: DatasetMeta) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let (dim, classes) = parse_header(header)?;
        let mut samples = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", k + 2));
            let mut fields = line.split(',');
            let y = fields.next().and_then(|f| f.trim().parse().ok()).ok_or_else(|| bad("bad label"))?;
            let x = fields.map(|f| f.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad("bad value"))?;
            samples.push(Sample { x, y });
        }
        Self::new(dim, classes, samples, meta)
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    /// Writes the text file and its `.meta.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())?;
        let side = Sidecar {
            schema: META_SCHEMA.into(),
            dim: self.dim,
            classes: self.classes,
            meta: self.meta.clone(),
            split: self.split.clone(),
        };
        std::fs::write(Self::meta_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
        Ok(())
    }

    /// Reads a dataset; the sidecar is optional.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let side = match std::fs::read_to_string(Self::meta_path(path)) {
            Ok(s) => Some(serde_json::from_str::<Sidecar>(&s)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let meta = side.as_ref().map(|s| s.meta.clone()).unwrap_or(DatasetMeta {
            kind: "file".into(),
            params: serde_json::Value::Null,
            seed: 0,
        });
        let mut ds = Self::from_text(&text, meta)?;
        if let Some(s) = side {
            ds.split = s.split;
            ds.validate()?;
        }
        Ok(ds)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut dim = None;
    let mut classes = None;
    for tok in line.split_whitespace() {
        match tok.split_once('=') {
            Some(("D", v)) => dim = v.parse().ok(),
            Some(("C", v)) => classes = v.parse().ok(),
            _ => {}
        }
    }
    match (dim, classes) {
        (Some(d), Some(c)) if d > 0 && c > 0 => Ok((d, c)),
        _ => Err(Error::Parse(format!("bad header {line:?}, expected `D=<int> C=<int>`"))),
    }
}

/// Appends `k` coordinates drawn from `U(0, s)`. The second value is the
/// log-density correction `k ln(1/s)` of the padded point.
pub fn pad_noise(x: &[f64], k: usize, scale: f64, rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
    if k == 0 || !(scale > 0.0) {
        return Err(invalid("padding needs k >= 1 and a positive scale"));
    }
    let mut out = x.to_vec();
    out.extend((0..k).map(|_| scale * rng.random::<f64>()));
    Ok((out, -(k as f64) * scale.ln()))
}

/// `alpha x1 + (1 - alpha) x0`.
pub fn interpolate(x0: &[f64], x1: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), got: x1.len() });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(x0.iter().zip(x1).map(|(a, b)| alpha * b + (1.0 - alpha) * a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let samples = vec![
            Sample { x: vec![0.5, -1.25], y: 0 },
            Sample { x: vec![1e-17, 3.0], y: 1 },
            Sample { x: vec![2.0, 0.1], y: 1 },
        ];
        Dataset::new(2, 2, samples, DatasetMeta { kind: "test".into(), params: serde_json::json!({"a": 1}), seed: 9 }).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let ds = tiny().with_split(0.34, 1).unwrap();
        let dir = std::env::temp_dir().join(format!("condflow-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.txt");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back, ds);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("D=2 C=2\n0,0.5,-1.25\n"));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn rejects_bad_rows() {
        let meta = tiny().meta;
        assert!(Dataset::from_text("D=2 C=2\n0,1,2,3\n", meta.clone()).is_err());
        assert!(Dataset::from_text("D=2 C=2\n2,1,2\n", meta.clone()).is_err());
        assert!(Dataset::from_text("D=2\n0,1,2\n", meta).is_err());
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let ds = tiny().with_split(0.34, 3).unwrap();
        let s = ds.split.as_ref().unwrap();
        assert_eq!(s.train.len() + s.test.len(), 3);
        assert_eq!(s.test.len(), 1);
        ds.validate().unwrap();
    }

    #[test]
    fn padding() {
        let mut rng = seeded(1);
        let (p, c) = pad_noise(&[1.0], 2, 1.0, &mut rng).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(p.len(), 3);
        let (p, c) = pad_noise(&[1.0, 2.0], 2, 1.0 / 128.0, &mut rng).unwrap();
        assert!((c - 2.0 * 128f64.ln()).abs() < 1e-12);
        assert!(p[2..].iter().all(|v| (0.0..=1.0 / 128.0).contains(v)));
        assert!(pad_noise(&[1.0], 0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn interpolation() {
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 4.0], 0.5).unwrap(), vec![1.0, 2.0]);
        assert_eq!(interpolate(&[3.0], &[5.0], 0.0).unwrap(), vec![3.0]);
        assert_eq!(interpolate(&[3.0], &[5.0], 1.0).unwrap(), vec![5.0]);
        assert!(interpolate(&[3.0], &[5.0, 1.0], 0.3).is_err());
        assert!(interpolate(&[3.0], &[5.0], 1.5).is_err());
    }
}
