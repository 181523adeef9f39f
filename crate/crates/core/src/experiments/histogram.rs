use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{invalid, Result};
use crate::flow::FlowModel;
use crate::math::{median, quantile_sorted};
use crate::training::score_all;

pub const WRONGCLASS_HEADER: &str = "index,y_true,y_wrong,nll_true,nll_wrong";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrongClassRow {
    pub index: usize,
    pub y_true: usize,
    /// Wrong class with the highest likelihood.
    pub y_wrong: usize,
    pub nll_true: f64,
    pub nll_wrong: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrongClassSummary {
    pub n: usize,
    pub accuracy: f64,
    /// Median of `log p(x | y_true) - log p(x | y_wrong)`.
    pub median_gap: f64,
    pub nll_q25: f64,
    pub nll_median: f64,
    pub nll_q75: f64,
    /// Interquartile range of `-log p(x | y_true)`.
    pub nll_iqr: f64,
    /// The median gap is smaller than the spread of the correct-class NLL.
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrongClassHistogram {
    pub rows: Vec<WrongClassRow>,
    pub summary: WrongClassSummary,
}

impl WrongClassHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(WRONGCLASS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6}", r.index, r.y_true, r.y_wrong, r.nll_true, r.nll_wrong);
        }
        out
    }
}

/// Correct-class and best-wrong-class conditional NLLs for every sample.
pub fn run_wrongclass_histogram(model: &FlowModel, samples: &[Sample]) -> Result<WrongClassHistogram> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    if model.classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    let scores = score_all(model, samples)?;
    let rows: Vec<WrongClassRow> = samples
        .iter()
        .zip(&scores)
        .enumerate()
        .map(|(index, (s, sc))| {
            let (y_wrong, ll_wrong) = sc
                .class_ll
                .iter()
                .enumerate()
                .filter(|(c, _)| *c != s.y)
                .fold((usize::MAX, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 || best.0 == usize::MAX { (c, v) } else { best });
            WrongClassRow { index, y_true: s.y, y_wrong, nll_true: -sc.class_ll[s.y], nll_wrong: -ll_wrong }
        })
        .collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.nll_wrong - r.nll_true).collect();
    let mut nll: Vec<f64> = rows.iter().map(|r| r.nll_true).collect();
    nll.sort_by(|a, b| a.total_cmp(b));
    let (q25, q50, q75) = (quantile_sorted(&nll, 0.25), quantile_sorted(&nll, 0.5), quantile_sorted(&nll, 0.75));
    let median_gap = median(&gaps);
    let correct = samples.iter().zip(&scores).filter(|(s, sc)| sc.predicted() == s.y).count();
    Ok(WrongClassHistogram {
        summary: WrongClassSummary {
            n: rows.len(),
            accuracy: correct as f64 / samples.len() as f64,
            median_gap,
            nll_q25: q25,
            nll_median: q50,
            nll_q75: q75,
            nll_iqr: q75 - q25,
            overlap: median_gap < q75 - q25,
        },
        rows,
    })
}
