use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{balance_with, build_labeled_set, LabeledPatch, Sample, Transform};
use crate::error::{Error, Result};
use crate::features::{EmbeddingStore, FeatureVector};
use crate::image::{gaussian_blur_rgb, RgbImage};
use crate::manifest::read_manifest;
use crate::svm::{train_rows, LinearSvmModel};

use super::work::Prepared;
use super::{Mode, ModelArtifact, PipelineConfig};

/// Replaces each defect entry by its eight augmentation variants.
pub(crate) fn augment_meta(meta: LabeledPatch) -> Result<Vec<LabeledPatch>> {
    Ok(Transform::AUGMENTATIONS
        .iter()
        .map(|&t| LabeledPatch {
            transform: (!t.is_identity()).then_some(t),
            ..meta.clone()
        })
        .collect())
}

/// The seeded, class-balanced training list for a set of labeled patches.
pub(crate) fn balanced_metas(labeled: Vec<LabeledPatch>, seed: u64) -> Result<Vec<LabeledPatch>> {
    let items = labeled.into_iter().map(|m| (m.label, m)).collect();
    Ok(balance_with(items, seed, augment_meta)?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

/// Standardizes and trains on already extracted features.
pub(crate) fn fit(
    metas: &[LabeledPatch],
    features: &[FeatureVector],
    cfg: &PipelineConfig,
) -> Result<LinearSvmModel> {
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.values.clone()).collect();
    let y: Vec<f64> = metas.iter().map(|m| m.label.sign()).collect();
    let model = train_rows(cfg.feature, &rows, &y, &cfg.train, |_| {})?;
    log::info!(
        "trained on {} patches: {} epochs, duality gap {:.3e}, converged {}",
        rows.len(),
        model.report.epochs,
        model.report.duality_gap,
        model.report.converged
    );
    Ok(model)
}

pub(crate) fn prepare_all(samples: &[Sample], cfg: &PipelineConfig) -> Result<Vec<Prepared>> {
    samples
        .par_iter()
        .map(|s| Prepared::new(s.id.clone(), &s.image, cfg))
        .collect()
}

/// Builds the labeled set, balances it, extracts features and trains.
pub fn train_model(
    samples: &[Sample],
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<ModelArtifact> {
    cfg.validate()?;
    if cfg.feature == crate::features::FeatureKind::External && embeddings.is_none() {
        return Err(Error::Config("external features need an embeddings manifest".into()));
    }
    let labeled = build_labeled_set(samples, cfg.patch_size)?;
    let metas = balanced_metas(labeled, cfg.seed)?;
    let prepared = prepare_all(samples, cfg)?;
    let by_id: HashMap<&str, &Prepared> = prepared.iter().map(|p| (p.id.as_str(), p)).collect();
    let features = metas
        .par_iter()
        .map(|m| by_id[m.parent_id.as_str()].features(m.anchor, m.transform, cfg, embeddings))
        .collect::<Result<Vec<_>>>()?;
    let model = fit(&metas, &features, cfg)?;
    Ok(ModelArtifact {
        config: cfg.clone(),
        model,
    })
}

/// Reads a manifest, trains, and writes the model file.
pub fn train_pipeline(
    manifest_path: impl AsRef<Path>,
    cfg: &PipelineConfig,
    embeddings: Option<&EmbeddingStore>,
    model_path: impl AsRef<Path>,
) -> Result<ModelArtifact> {
    let samples = read_manifest(manifest_path)?.load_samples()?;
    let artifact = train_model(&samples, cfg, embeddings)?;
    super::save_model(&artifact, model_path)?;
    Ok(artifact)
}

/// Writes every patch an external extractor needs as a PNG: each grid patch,
/// plus the augmentation variants of defect patches. `keys.tsv` maps patch
/// keys to file names (`:` in keys becomes `_` in names). Returns the key count.
pub fn export_patches(samples: &[Sample], cfg: &PipelineConfig, dir: impl AsRef<Path>) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labeled = build_labeled_set(samples, cfg.patch_size)?;
    let mut working: HashMap<&str, RgbImage> = HashMap::new();
    for s in samples {
        let img = match cfg.mode {
            Mode::Washed => s.image.clone(),
            Mode::Unwashed => gaussian_blur_rgb(&s.image, cfg.sigma)?,
        };
        working.insert(s.id.as_str(), img);
    }
    let mut index = String::from("# key\tfile\n");
    let mut count = 0;
    for meta in labeled {
        let variants = if meta.label.is_defect() {
            augment_meta(meta)?
        } else {
            vec![meta]
        };
        for m in variants {
            let mut patch = working[m.parent_id.as_str()].crop(m.anchor.rect(cfg.patch_size))?;
            if let Some(t) = m.transform {
                patch = t.apply(&patch)?;
            }
            let key = m.key();
            let file = format!("{}.png", key.replace(':', "_"));
            patch.save_png(dir.join(&file))?;
            let _ = writeln!(index, "{key}\t{file}");
            count += 1;
        }
    }
    let path = dir.join("keys.tsv");
    fs::write(&path, index).map_err(|e| Error::io(path, e))?;
    Ok(count)
}
