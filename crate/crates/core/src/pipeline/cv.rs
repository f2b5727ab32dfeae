use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_labeled_set, FoldPlan, Label, LabeledPatch, Sample};
use crate::error::{Error, Result};
use crate::features::{EmbeddingStore, FeatureKind, FeatureVector};

use super::metrics::MetricsReport;
use super::train::{augment_meta, balanced_metas, fit, prepare_all};
use super::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub metrics: MetricsReport,
}

/// Unweighted mean over folds; counts become fractional. Sensitivity and
/// specificity average only the folds where they are defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: MeanMetrics,
}

impl CvReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,tp,fp,tn,fn,sensitivity,specificity,accuracy\n");
        for f in &self.folds {
            let m = &f.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6}",
                f.fold, m.tp, m.fp, m.tn, m.fn_, m.sensitivity, m.specificity, m.accuracy
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            out,
            "mean,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            m.tp, m.fp, m.tn, m.fn_, m.sensitivity, m.specificity, m.accuracy
        );
        out
    }

    /// Aligned text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>6} {:>6} {:>7} {:>6} {:>8} {:>8} {:>8}\n",
            "fold", "tp", "fp", "tn", "fn", "sens", "spec", "acc"
        );
        for f in &self.folds {
            let m = &f.metrics;
            let _ = writeln!(
                out,
                "{:>5} {:>6} {:>6} {:>7} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                f.fold, m.tp, m.fp, m.tn, m.fn_, m.sensitivity, m.specificity, m.accuracy
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            out,
            "{:>5} {:>6.1} {:>6.1} {:>7.1} {:>6.1} {:>8.4} {:>8.4} {:>8.4}",
            "mean", m.tp, m.fp, m.tn, m.fn_, m.sensitivity, m.specificity, m.accuracy
        );
        out
    }
}

pub fn write_metrics_csv(report: &CvReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_csv()).map_err(|e| crate::error::Error::io(path, e))
}

fn mean_of(folds: &[FoldReport]) -> MeanMetrics {
    let n = folds.len() as f64;
    let avg = |f: &dyn Fn(&MetricsReport) -> f64| folds.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    let avg_defined = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let vals: Vec<f64> = folds.iter().filter_map(|r| f(&r.metrics)).collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    MeanMetrics {
        tp: avg(&|m| m.tp as f64),
        fp: avg(&|m| m.fp as f64),
        tn: avg(&|m| m.tn as f64),
        fn_: avg(&|m| m.fn_ as f64),
        sensitivity: avg_defined(&|m| m.sensitivity_defined.then_some(m.sensitivity)),
        specificity: avg_defined(&|m| m.specificity_defined.then_some(m.specificity)),
        accuracy: avg(&|m| m.accuracy),
    }
}

/// Grouped k-fold evaluation of patch classification.
///
/// Each fold trains on the balanced patches of the other folds' images and
/// classifies every patch of its own images, with no gating and no
/// expansion. Fold `f` seeds balancing and the solver with `seed ^ f`.
pub fn cross_validate(
    samples: &[Sample],
    plan: &FoldPlan,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<CvReport> {
    cfg.validate()?;
    if cfg.feature == FeatureKind::External && embeddings.is_none() {
        return Err(Error::Config("external features need an embeddings manifest".into()));
    }
    for s in samples {
        if plan.fold_of(&s.id).is_none() {
            return Err(Error::Parameter(format!("image `{}` has no fold", s.id)));
        }
    }
    if samples.len() < plan.k {
        return Err(Error::Parameter(format!(
            "{} images cannot fill {} folds",
            samples.len(),
            plan.k
        )));
    }

    let prepared = prepare_all(samples, cfg)?;
    let by_id: HashMap<&str, usize> = prepared.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let labeled = build_labeled_set(samples, cfg.patch_size)?;

    // Every patch once, plus the augmented variants of every defect patch.
    let mut metas: Vec<LabeledPatch> = Vec::new();
    for m in &labeled {
        if m.label.is_defect() {
            metas.extend(augment_meta(m.clone())?);
        } else {
            metas.push(m.clone());
        }
    }
    let vectors = metas
        .par_iter()
        .map(|m| prepared[by_id[m.parent_id.as_str()]].features(m.anchor, m.transform, cfg, embeddings))
        .collect::<Result<Vec<FeatureVector>>>()?;
    let table: HashMap<String, FeatureVector> = metas.iter().map(|m| m.key()).zip(vectors).collect();

    let folds = (0..plan.k)
        .into_par_iter()
        .map(|fold| run_fold(fold, &labeled, &table, plan, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mean = mean_of(&folds);
    Ok(CvReport { folds, mean })
}

fn run_fold(
    fold: usize,
    labeled: &[LabeledPatch],
    table: &HashMap<String, FeatureVector>,
    plan: &FoldPlan,
    cfg: &PipelineConfig,
) -> Result<FoldReport> {
    let (test, train): (Vec<&LabeledPatch>, Vec<&LabeledPatch>) =
        labeled.iter().partition(|m| plan.fold_of(&m.parent_id) == Some(fold));
    let train_ids: BTreeSet<String> = train.iter().map(|m| m.parent_id.clone()).collect();
    let test_ids: BTreeSet<String> = test.iter().map(|m| m.parent_id.clone()).collect();
    assert!(
        train_ids.is_disjoint(&test_ids),
        "fold {fold}: an image appears in both training and test sets"
    );

    let seed = cfg.seed ^ fold as u64;
    let mut fold_cfg = cfg.clone();
    fold_cfg.train.seed = cfg.train.seed ^ fold as u64;
    let metas = balanced_metas(train.into_iter().cloned().collect(), seed)?;
    let features: Vec<FeatureVector> = metas.iter().map(|m| table[&m.key()].clone()).collect();
    let model = fit(&metas, &features, &fold_cfg)?;

    let mut predicted = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for m in test {
        let s = model.score(&table[&m.key()].values)?;
        predicted.push(if s > 0.0 { Label::Defect } else { Label::NoDefect });
        truth.push(m.label);
    }
    Ok(FoldReport {
        fold,
        train_ids: train_ids.into_iter().collect(),
        test_ids: test_ids.into_iter().collect(),
        metrics: MetricsReport::from_pairs(&predicted, &truth)?,
    })
}
