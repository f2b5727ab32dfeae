use serde::{Deserialize, Serialize};

use crate::dataset::{label_patch, Label};
use crate::error::{Error, Result};
use crate::image::BinaryMask;

use super::DefectMap;

/// Patch-level confusion counts with defect as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    /// False when TP + FN = 0 and sensitivity was reported as 0.
    pub sensitivity_defined: bool,
    /// False when TN + FP = 0 and specificity was reported as 0.
    pub specificity_defined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (sensitivity, sensitivity_defined) = ratio(tp, tp + fn_);
        let (specificity, specificity_defined) = ratio(tn, tn + fp);
        let (accuracy, _) = ratio(tp + tn, tp + tn + fp + fn_);
        Self {
            tp,
            fp,
            tn,
            fn_,
            sensitivity,
            specificity,
            accuracy,
            sensitivity_defined,
            specificity_defined,
        }
    }

    pub fn from_pairs(predicted: &[Label], truth: &[Label]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::Parameter(format!(
                "{} predictions for {} ground-truth labels",
                predicted.len(),
                truth.len()
            )));
        }
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (p, t) in predicted.iter().zip(truth) {
            match (p.is_defect(), t.is_defect()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Ok(Self::from_counts(tp, fp, tn, fn_))
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// FP / (FP + TN), 0 when there are no negatives.
    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn).0
    }

    /// Sums the counts of several reports.
    pub fn pooled(reports: &[MetricsReport]) -> Self {
        let sum = |f: fn(&MetricsReport) -> usize| reports.iter().map(f).sum();
        Self::from_counts(sum(|r| r.tp), sum(|r| r.fp), sum(|r| r.tn), sum(|r| r.fn_))
    }
}

/// Compares map decisions with per-anchor truth given in grid order.
pub fn evaluate(map: &DefectMap, truth: &[Label]) -> Result<MetricsReport> {
    if truth.len() != map.entries.len() {
        return Err(Error::Parameter(format!(
            "map has {} patches but {} truth labels were given",
            map.entries.len(),
            truth.len()
        )));
    }
    let predicted: Vec<Label> = map.entries.iter().map(|e| e.decision).collect();
    MetricsReport::from_pairs(&predicted, truth)
}

/// Labels the map's grid from a mask by majority rule, then evaluates.
pub fn evaluate_mask(map: &DefectMap, mask: &BinaryMask) -> Result<MetricsReport> {
    let grid = map.grid();
    if mask.width() != grid.image_width() || mask.height() != grid.image_height() {
        return Err(Error::Parameter(format!(
            "mask is {}x{} but the map covers {}x{}",
            mask.width(),
            mask.height(),
            grid.image_width(),
            grid.image_height()
        )));
    }
    let truth = (0..grid.len())
        .map(|i| label_patch(mask, grid.rect(i)))
        .collect::<Result<Vec<_>>>()?;
    evaluate(map, &truth)
}
