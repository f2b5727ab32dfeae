use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::EmbeddingStore;
use crate::image::{partition, RgbImage};
use crate::svm::LinearSvmModel;

use super::infer::{gate_for, run_prepared};
use super::work::Prepared;
use super::PipelineConfig;

const REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub full_seconds: f64,
    pub gated_seconds: f64,
    pub full_patches: usize,
    pub gated_patches: usize,
    /// `full_seconds / gated_seconds`.
    pub speedup: f64,
}

/// Times classify-every-patch against gated inference on one decoded
/// image. Both paths include preprocessing, feature extraction,
/// classification and expansion; the gated path also includes detection.
/// Each path is timed several times and the fastest run is kept.
pub fn benchmark(
    model: &LinearSvmModel,
    image_id: &str,
    image: &RgbImage,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<TimingReport> {
    let grid = partition(image.width(), image.height(), cfg.patch_size)?;
    let full_patches = grid.len();
    let mut gated_patches = full_patches;
    let mut full_seconds = f64::INFINITY;
    let mut gated_seconds = f64::INFINITY;
    for _ in 0..REPEATS {
        let t = Instant::now();
        let prep = Prepared::new(image_id, image, cfg)?;
        run_prepared(model, &prep, grid.clone(), cfg, embeddings, None, cfg.expansion_enabled())?;
        full_seconds = full_seconds.min(t.elapsed().as_secs_f64());

        let t = Instant::now();
        let prep = Prepared::new(image_id, image, cfg)?;
        let gate = gate_for(&prep, &grid, cfg)?;
        run_prepared(model, &prep, grid.clone(), cfg, embeddings, gate.as_deref(), cfg.expansion_enabled())?;
        gated_seconds = gated_seconds.min(t.elapsed().as_secs_f64());
        gated_patches = gate.map_or(full_patches, |g| g.iter().filter(|&&on| on).count());
    }
    Ok(TimingReport {
        full_seconds,
        gated_seconds,
        full_patches,
        gated_patches,
        speedup: full_seconds / gated_seconds,
    })
}
