use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Sample};
use crate::error::{invalid, Result};
use crate::math::argmax;
use crate::rng::Rng;

/// Glyphs on a blurred-noise background.
///
/// Pixel value: `clip(offset + intensity * mask_y + background * blur(u) + N(0, glyph_noise^2))`
/// with `u` i.i.d. uniform on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphBGSpec {
    pub width: usize,
    pub height: usize,
    /// One row-major binary mask per class.
    pub glyphs: Vec<Vec<bool>>,
    pub intensity: f64,
    pub glyph_noise: f64,
    pub background: f64,
    pub blur: f64,
    /// Base pixel level; keeps values away from the clipping bounds.
    pub offset: f64,
}

impl Default for GlyphBGSpec {
    fn default() -> Self {
        Self {
            width: 8,
            height: 8,
            glyphs: default_glyphs(8, 8),
            intensity: 0.4,
            glyph_noise: 0.02,
            background: 0.4,
            blur: 0.0,
            offset: 0.1,
        }
    }
}

/// Horizontal bar, vertical bar, cross and hollow square.
pub fn default_glyphs(width: usize, height: usize) -> Vec<Vec<bool>> {
    let (w, h) = (width, height);
    let (row, col) = (h / 2 - 1, w / 2 - 1);
    let mask = |f: &dyn Fn(usize, usize) -> bool| -> Vec<bool> { (0..h * w).map(|k| f(k / w, k % w)).collect() };
    let hbar = mask(&|r, c| r == row && c >= 1 && c + 1 < w);
    let vbar = mask(&|r, c| c == col && r >= 1 && r + 1 < h);
    let cross = hbar.iter().zip(&vbar).map(|(a, b)| *a || *b).collect();
    let (r0, r1, c0, c1) = (h / 4, h - 1 - h / 4, w / 4, w - 1 - w / 4);
    let square = mask(&|r, c| (r == r0 || r == r1) && (c0..=c1).contains(&c) || (c == c0 || c == c1) && (r0..=r1).contains(&r));
    vec![hbar, vbar, cross, square]
}

impl GlyphBGSpec {
    pub fn dim(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(invalid("glyph grid must be at least 4x4"));
        }
        if self.glyphs.len() < 2 || self.glyphs.iter().any(|g| g.len() != self.dim()) {
            return Err(invalid("need at least two glyph masks matching the grid"));
        }
        for i in 0..self.glyphs.len() {
            if !self.glyphs[i].iter().any(|&b| b) {
                return Err(invalid("empty glyph mask"));
            }
            if self.glyphs[..i].contains(&self.glyphs[i]) {
                return Err(invalid("glyph masks must be pairwise distinct"));
            }
        }
        if !(0.0..=1.0).contains(&self.background) || !(self.blur >= 0.0) || !(self.glyph_noise >= 0.0) {
            return Err(invalid("need background in [0, 1], blur >= 0 and glyph noise >= 0"));
        }
        Ok(())
    }

    pub fn render(&self, y: usize, rng: &mut Rng) -> Vec<f64> {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random()).collect();
        let bg = gaussian_blur(&u, self.width, self.height, self.blur);
        self.glyphs[y]
            .iter()
            .zip(&bg)
            .map(|(&on, b)| {
                let g = if on { self.intensity } else { 0.0 };
                let noise = if self.glyph_noise > 0.0 { self.glyph_noise * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                (self.offset + g + self.background * b + noise).clamp(0.0, 1.0)
            })
            .collect()
    }
}

pub fn make_glyph_bg(spec: &GlyphBGSpec, n: usize, seed: u64, rng: &mut Rng) -> Result<Dataset> {
    spec.validate()?;
    let classes = spec.glyphs.len();
    let samples = (0..n)
        .map(|_| {
            let y = rng.random_range(0..classes);
            Sample { x: spec.render(y, rng), y }
        })
        .collect();
    let meta = DatasetMeta { kind: "glyph-bg".into(), params: serde_json::to_value(spec)?, seed };
    Dataset::new(spec.dim(), classes, samples, meta)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-0.5 * t * t / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Half-sample symmetric reflection into `[0, n)`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn blur_1d(src: &[f64], n: usize, stride: usize, lines: usize, line_stride: usize, k: &[f64]) -> Vec<f64> {
    let mut out = src.to_vec();
    let radius = (k.len() / 2) as isize;
    for l in 0..lines {
        let base = l * line_stride;
        for i in 0..n {
            let mut acc = 0.0;
            for (t, w) in k.iter().enumerate() {
                let j = reflect(i as isize + t as isize - radius, n);
                acc += w * src[base + j * stride];
            }
            out[base + i * stride] = acc;
        }
    }
    out
}

/// Separable Gaussian blur of a row-major `width x height` image with
/// reflective borders. `sigma = 0` returns the input unchanged.
pub fn gaussian_blur(image: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    assert_eq!(image.len(), width * height);
    if sigma <= 0.0 {
        return image.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let rows = blur_1d(image, width, 1, height, width, &k);
    blur_1d(&rows, height, width, width, 1, &k)
}

/// Reference classifier: the glyph whose mask has the largest Pearson
/// correlation with the image.
#[derive(Debug, Clone)]
pub struct MaskClassifier {
    centred: Vec<Vec<f64>>,
}

impl MaskClassifier {
    pub fn new(spec: &GlyphBGSpec) -> Self {
        let centred = spec
            .glyphs
            .iter()
            .map(|g| {
                let m = g.iter().filter(|&&b| b).count() as f64 / g.len() as f64;
                let v: Vec<f64> = g.iter().map(|&b| f64::from(u8::from(b)) - m).collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.into_iter().map(|a| a / n).collect()
            })
            .collect();
        Self { centred }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        // the image's own norm is shared by all classes and drops out of the argmax
        let scores: Vec<f64> = self.centred.iter().map(|m| m.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
        argmax(&scores)
    }

    pub fn accuracy(&self, samples: &[Sample]) -> f64 {
        samples.iter().filter(|s| self.predict(&s.x) == s.y).count() as f64 / samples.len().max(1) as f64
    }
}
