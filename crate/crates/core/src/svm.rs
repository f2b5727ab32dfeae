//! Feature standardization and a linear SVM trained by dual coordinate
//! descent on the L1 (hinge) loss.
//!
//! The bias is handled by appending a constant 1 to every standardized
//! vector, so the solver minimizes
//! `½‖w‖² + C Σ max(0, 1 − yᵢ w·x̂ᵢ)` over the augmented weights and the
//! dual has box constraints only: `0 ≤ αᵢ ≤ C`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};

const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, replaced by 1 for constant dimensions.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Parameter("cannot standardize an empty set".into()))?;
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Parameter("feature vectors have mixed dimensions".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < STD_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::Parameter(format!(
                "vector has {} entries, standardizer expects {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

pub fn fit_standardizer(xs: &[FeatureVector]) -> Result<Standardizer> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| x.values.clone()).collect();
    Standardizer::fit(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    /// Stop once `(primal − dual) / |primal|` falls to this value.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Parameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub duality_gap: f64,
    pub primal: f64,
    pub dual: f64,
    /// False when the epoch limit was hit before the gap tolerance.
    pub converged: bool,
}

/// State after a completed epoch, passed to training observers.
#[derive(Debug)]
pub struct EpochSnapshot<'a> {
    pub epoch: usize,
    pub alpha: &'a [f64],
    pub weights: &'a [f64],
    pub primal: f64,
    /// Dual objective in maximization form, `Σα − ½‖w‖²`.
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Weights over the (already augmented) input rows.
    pub weights: Vec<f64>,
    pub report: TrainReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `½‖w‖² + C Σ max(0, 1 − yᵢ w·xᵢ)`.
pub fn primal_objective(weights: &[f64], rows: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &yi)| (1.0 - yi * dot(weights, x)).max(0.0))
        .sum();
    0.5 * dot(weights, weights) + c * hinge
}

fn validate_problem(rows: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if rows.is_empty() || rows.len() != y.len() {
        return Err(Error::Parameter(format!(
            "{} feature rows for {} labels",
            rows.len(),
            y.len()
        )));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parameter("feature vectors have mixed dimensions".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Parameter("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Dataset("training data must contain both classes".into()));
    }
    Ok(dim)
}

/// Dual coordinate descent on the box-constrained hinge-loss dual.
///
/// Each epoch visits every coordinate once in a seeded random order and
/// minimizes the dual exactly along it, clipping to `[0, C]`. After each
/// epoch the observer sees the current iterate.
pub fn solve_dual(
    rows: &[Vec<f64>],
    y: &[f64],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochSnapshot<'_>),
) -> Result<DualSolution> {
    cfg.validate()?;
    let dim = validate_problem(rows, y)?;
    let n = rows.len();
    let c = cfg.c;
    let diag: Vec<f64> = rows.iter().map(|x| dot(x, x)).collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport {
        epochs: 0,
        duality_gap: f64::INFINITY,
        primal: f64::NAN,
        dual: f64::NAN,
        converged: false,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if diag[i] <= 0.0 {
                continue;
            }
            let x = &rows[i];
            let g = y[i] * dot(&w, x) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg != 0.0 {
                let old = alpha[i];
                let new = (old - g / diag[i]).clamp(0.0, c);
                let step = (new - old) * y[i];
                if step != 0.0 {
                    alpha[i] = new;
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj += step * xj;
                    }
                }
            }
        }

        let primal = primal_objective(&w, rows, y, c);
        let dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
        let gap = (primal - dual) / primal.abs().max(f64::MIN_POSITIVE);
        report = TrainReport {
            epochs: epoch,
            duality_gap: gap,
            primal,
            dual,
            converged: gap <= cfg.tolerance,
        };
        observer(&EpochSnapshot {
            epoch,
            alpha: &alpha,
            weights: &w,
            primal,
            dual,
        });
        if report.converged {
            break;
        }
    }
    Ok(DualSolution {
        alpha,
        weights: w,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub kind: FeatureKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub standardizer: Standardizer,
    pub report: TrainReport,
}

impl LinearSvmModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// Decision value on a raw (unstandardized) feature vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardizer.apply(x)?;
        Ok(dot(&self.weights, &z) + self.bias)
    }

    /// Defect iff the score is strictly positive.
    pub fn predict(&self, x: &FeatureVector) -> Result<(Label, f64)> {
        if x.kind != self.kind {
            return Err(Error::Parameter(format!(
                "model expects {} features, got {}",
                self.kind, x.kind
            )));
        }
        let s = self.score(&x.values)?;
        Ok((if s > 0.0 { Label::Defect } else { Label::NoDefect }, s))
    }
}

pub fn predict(model: &LinearSvmModel, x: &FeatureVector) -> Result<(Label, f64)> {
    model.predict(x)
}

/// Appends the constant bias feature.
pub(crate) fn augment_rows(std_rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    std_rows
        .into_iter()
        .map(|mut r| {
            r.push(1.0);
            r
        })
        .collect()
}

/// Standardizes, trains, and packages a model from raw feature rows.
pub fn train_rows(
    kind: FeatureKind,
    rows: &[Vec<f64>],
    y: &[f64],
    cfg: &TrainConfig,
    observer: impl FnMut(&EpochSnapshot<'_>),
) -> Result<LinearSvmModel> {
    validate_problem(rows, y)?;
    let standardizer = Standardizer::fit(rows)?;
    let std_rows = rows
        .iter()
        .map(|r| standardizer.apply(r))
        .collect::<Result<Vec<_>>>()?;
    let sol = solve_dual(&augment_rows(std_rows), y, cfg, observer)?;
    let mut weights = sol.weights;
    let bias = weights.pop().expect("bias feature present");
    Ok(LinearSvmModel {
        kind,
        weights,
        bias,
        c: cfg.c,
        standardizer,
        report: sol.report,
    })
}

pub fn train_svm(xs: &[FeatureVector], y: &[f64], cfg: &TrainConfig) -> Result<LinearSvmModel> {
    let kind = xs
        .first()
        .map(|x| x.kind)
        .ok_or_else(|| Error::Parameter("no training vectors".into()))?;
    if xs.iter().any(|x| x.kind != kind) {
        return Err(Error::Parameter("training vectors mix feature kinds".into()));
    }
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| x.values.clone()).collect();
    train_rows(kind, &rows, y, cfg, |_| {})
}
