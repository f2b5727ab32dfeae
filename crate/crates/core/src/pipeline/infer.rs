use rayon::prelude::*;

use crate::dataset::{label_patch, Label};
use crate::error::{Error, Result};
use crate::features::EmbeddingStore;
use crate::image::{partition, BinaryMask, PatchGrid, RgbImage};
use crate::surf::{detect, gate_mask};
use crate::svm::LinearSvmModel;

use super::defect_map::{postprocess_expand, DefectMap, MapEntry};
use super::work::Prepared;
use super::PipelineConfig;

/// Smallest image the detector's largest first-octave filter fits in.
const DETECTOR_MIN_SIDE: usize = 27;

fn check_model(model: &LinearSvmModel, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    if model.kind != cfg.feature {
        return Err(Error::Config(format!(
            "model was trained on {} features but {} was requested",
            model.kind, cfg.feature
        )));
    }
    Ok(())
}

/// Classifies the selected patches (all when `selected` is `None`) and
/// optionally expands.
pub(crate) fn run_prepared(
    model: &LinearSvmModel,
    prep: &Prepared,
    grid: PatchGrid,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
    selected: Option<&[bool]>,
    expand: bool,
) -> Result<DefectMap> {
    let indices: Vec<usize> = (0..grid.len())
        .filter(|&i| selected.map_or(true, |s| s[i]))
        .collect();
    let anchors: Vec<_> = indices.iter().map(|&i| grid.anchor(i)).collect();
    let scores = anchors
        .par_iter()
        .map(|&a| {
            let fv = prep.features(a, None, cfg, embeddings)?;
            model.score(&fv.values)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut map = DefectMap::new(prep.id.clone(), grid);
    for (&i, &s) in indices.iter().zip(&scores) {
        map.entries[i] = MapEntry::classified(s);
    }
    if expand {
        map = postprocess_expand(&map, &prep.gray, cfg.iv_threshold)?;
    }
    Ok(map)
}

/// Per-patch gate flags from keypoints on the working grayscale image.
pub(crate) fn gate_for(prep: &Prepared, grid: &PatchGrid, cfg: &PipelineConfig) -> Result<Option<Vec<bool>>> {
    if prep.width() < DETECTOR_MIN_SIDE || prep.height() < DETECTOR_MIN_SIDE {
        log::warn!(
            "{}: image too small for the detector, classifying every patch",
            prep.id
        );
        return Ok(None);
    }
    let keypoints = detect(&prep.gray, &cfg.detector)?;
    Ok(Some(gate_mask(grid, &keypoints)))
}

/// Gated inference: detect keypoints, classify only patches containing one,
/// then expand defects into similar neighbours when enabled.
pub fn infer(
    model: &LinearSvmModel,
    image_id: &str,
    image: &RgbImage,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<DefectMap> {
    check_model(model, cfg)?;
    let grid = partition(image.width(), image.height(), cfg.patch_size)?;
    let prep = Prepared::new(image_id, image, cfg)?;
    let gate = gate_for(&prep, &grid, cfg)?;
    run_prepared(model, &prep, grid, cfg, embeddings, gate.as_deref(), cfg.expansion_enabled())
}

/// Ungated inference: every patch is classified, then expanded when enabled.
pub fn classify_all(
    model: &LinearSvmModel,
    image_id: &str,
    image: &RgbImage,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<DefectMap> {
    check_model(model, cfg)?;
    let grid = partition(image.width(), image.height(), cfg.patch_size)?;
    let prep = Prepared::new(image_id, image, cfg)?;
    run_prepared(model, &prep, grid, cfg, embeddings, None, cfg.expansion_enabled())
}

/// Majority-rule ground truth for every patch of `grid`, in grid order.
pub fn truth_labels(mask: &BinaryMask, grid: &PatchGrid) -> Result<Vec<Label>> {
    (0..grid.len()).map(|i| label_patch(mask, grid.rect(i))).collect()
}
