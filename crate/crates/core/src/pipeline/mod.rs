//! Training, gated inference, post-processing, evaluation and timing.

mod artifact;
mod bench;
mod cv;
mod defect_map;
mod infer;
mod metrics;
mod train;
mod work;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::surf::DetectorParams;
use crate::svm::TrainConfig;

pub use artifact::{load_model, save_model, ModelArtifact, MODEL_MAGIC, MODEL_VERSION};
pub use bench::{benchmark, TimingReport};
pub use cv::{cross_validate, write_metrics_csv, CvReport, FoldReport, MeanMetrics};
pub use defect_map::{
    draw_overlay, postprocess_expand, read_defect_map, write_defect_map, DefectMap, MapEntry,
    Provenance,
};
pub use infer::{classify_all, infer, truth_labels};
pub use metrics::{evaluate, evaluate_mask, MetricsReport};
pub use train::{export_patches, train_model, train_pipeline};
pub use work::Prepared;

pub const MIN_PATCH_SIZE: usize = 20;
pub const MAX_PATCH_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Washed,
    /// Gaussian pre-filter on the working images before detection and features.
    Unwashed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Washed => "washed",
            Mode::Unwashed => "unwashed",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "washed" => Ok(Mode::Washed),
            "unwashed" => Ok(Mode::Unwashed),
            other => Err(Error::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub patch_size: usize,
    pub feature: FeatureKind,
    pub mode: Mode,
    /// Blur sigma used in unwashed mode.
    pub sigma: f64,
    pub detector: DetectorParams,
    /// Intensity-variation threshold for neighbour expansion, 0-255 scale.
    pub iv_threshold: f64,
    /// Run neighbour expansion after classification. `None` follows the
    /// mode: on when unwashed, off when washed.
    pub expand: Option<bool>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_size: 65,
            feature: FeatureKind::Lbp,
            mode: Mode::Washed,
            sigma: 1.5,
            detector: DetectorParams::for_gating(),
            iv_threshold: 3.0,
            expand: None,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn expansion_enabled(&self) -> bool {
        self.expand.unwrap_or(self.mode == Mode::Unwashed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_PATCH_SIZE..=MAX_PATCH_SIZE).contains(&self.patch_size) {
            return Err(Error::Parameter(format!(
                "patch size must be in [{MIN_PATCH_SIZE}, {MAX_PATCH_SIZE}], got {}",
                self.patch_size
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.iv_threshold >= 0.0) {
            return Err(Error::Parameter(format!(
                "IV threshold must be non-negative, got {}",
                self.iv_threshold
            )));
        }
        if self.feature == FeatureKind::Surf && self.patch_size < crate::features::SURF_MIN_SIDE {
            return Err(Error::Parameter(format!(
                "SURF descriptors need patches of at least {} px",
                crate::features::SURF_MIN_SIDE
            )));
        }
        self.detector.validate()?;
        self.train.validate()
    }
}
