//! Labeled patch sets built from image/mask pairs, minority-class
//! augmentation, seeded class balancing and image-level fold assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    flip_patch, partition, rotate_patch, Anchor, BinaryMask, FlipAxis, Raster, Rect, RgbImage,
};

/// One annotated image: the pixels plus its defect mask (1 = defect pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: RgbImage,
    pub mask: BinaryMask,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: RgbImage, mask: BinaryMask) -> Result<Self> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(Error::Parameter(format!(
                "mask is {}x{} but image is {}x{}",
                mask.width(),
                mask.height(),
                image.width(),
                image.height()
            )));
        }
        Ok(Self {
            id: id.into(),
            image,
            mask,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NoDefect,
    Defect,
}

impl Label {
    /// SVM target: defect is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Defect => 1.0,
            Label::NoDefect => -1.0,
        }
    }

    pub fn is_defect(self) -> bool {
        self == Label::Defect
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Defect => "defect",
            Label::NoDefect => "no_defect",
        })
    }
}

/// The geometric variants produced for each defect patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    Rotate(u16),
    Flip(FlipAxis),
}

impl Transform {
    /// Variant order produced by [`augment_defect`]; the first is the identity.
    pub const AUGMENTATIONS: [Transform; 8] = [
        Transform::Rotate(0),
        Transform::Rotate(60),
        Transform::Rotate(120),
        Transform::Rotate(180),
        Transform::Rotate(240),
        Transform::Rotate(300),
        Transform::Flip(FlipAxis::Horizontal),
        Transform::Flip(FlipAxis::Vertical),
    ];

    pub fn is_identity(self) -> bool {
        self == Transform::Rotate(0)
    }

    pub fn apply<R: Raster>(self, patch: &R) -> Result<R> {
        match self {
            Transform::Rotate(0) => Ok(patch.clone()),
            Transform::Rotate(deg) => rotate_patch(patch, f64::from(deg)),
            Transform::Flip(axis) => Ok(flip_patch(patch, axis)),
        }
    }

    /// Short tag used in patch keys, e.g. `rot60`, `flip_h`.
    pub fn tag(self) -> String {
        match self {
            Transform::Rotate(deg) => format!("rot{deg}"),
            Transform::Flip(FlipAxis::Horizontal) => "flip_h".into(),
            Transform::Flip(FlipAxis::Vertical) => "flip_v".into(),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPatch {
    pub parent_id: String,
    pub anchor: Anchor,
    pub label: Label,
    /// Set on augmented copies; the anchor then refers to the source patch.
    pub transform: Option<Transform>,
}

impl LabeledPatch {
    /// `"<image_id>:<row>:<col>[:<transform>]"`, the key used for external embeddings.
    pub fn key(&self) -> String {
        patch_key(&self.parent_id, self.anchor, self.transform)
    }
}

pub fn patch_key(image_id: &str, anchor: Anchor, transform: Option<Transform>) -> String {
    match transform {
        Some(t) if !t.is_identity() => format!("{image_id}:{}:{}:{t}", anchor.row, anchor.col),
        _ => format!("{image_id}:{}:{}", anchor.row, anchor.col),
    }
}

/// A labeled patch carrying its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample<P> {
    pub meta: LabeledPatch,
    pub pixels: P,
}

/// Defect iff strictly more than half of the rect's mask pixels are set.
pub fn label_patch(mask: &BinaryMask, r: Rect) -> Result<Label> {
    let ones = mask.count_in(r)?;
    Ok(if 2 * ones > r.area() {
        Label::Defect
    } else {
        Label::NoDefect
    })
}

/// One labeled patch per grid anchor of every sample, in sample then grid order.
pub fn build_labeled_set(samples: &[Sample], patch_size: usize) -> Result<Vec<LabeledPatch>> {
    let mut out = Vec::new();
    for s in samples {
        let grid = partition(s.image.width(), s.image.height(), patch_size)?;
        for anchor in grid.anchors() {
            out.push(LabeledPatch {
                parent_id: s.id.clone(),
                anchor,
                label: label_patch(&s.mask, anchor.rect(patch_size))?,
                transform: None,
            });
        }
    }
    Ok(out)
}

/// The eight training variants of a defect patch: rotations by 0..300° in
/// 60° steps, then horizontal and vertical flips of the original.
pub fn augment_defect<R: Raster>(patch: &R) -> Result<Vec<R>> {
    if patch.width() != patch.height() {
        return Err(Error::Parameter(format!(
            "augmentation needs a square patch, got {}x{}",
            patch.width(),
            patch.height()
        )));
    }
    Transform::AUGMENTATIONS.iter().map(|t| t.apply(patch)).collect()
}

/// Expands every defect item with `augment`, then undersamples so both
/// classes end up with the same count.
///
/// The no-defect class is reduced to the augmented defect count by a seeded
/// uniform draw without replacement; if it is already smaller, the augmented
/// defects are reduced instead. Survivors keep their input order, defects
/// first.
pub fn balance_with<T, F>(items: Vec<(Label, T)>, seed: u64, mut augment: F) -> Result<Vec<(Label, T)>>
where
    F: FnMut(T) -> Result<Vec<T>>,
{
    let mut defects = Vec::new();
    let mut clean = Vec::new();
    for (label, item) in items {
        match label {
            Label::Defect => defects.push(item),
            Label::NoDefect => clean.push(item),
        }
    }
    if defects.is_empty() || clean.is_empty() {
        return Err(Error::Dataset(format!(
            "balancing needs both classes, got {} defect and {} no-defect patches",
            defects.len(),
            clean.len()
        )));
    }

    let mut augmented = Vec::with_capacity(defects.len() * 8);
    for d in defects {
        augmented.extend(augment(d)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = augmented.len().min(clean.len());
    let augmented = subsample(augmented, target, &mut rng);
    let clean = subsample(clean, target, &mut rng);

    Ok(augmented
        .into_iter()
        .map(|d| (Label::Defect, d))
        .chain(clean.into_iter().map(|c| (Label::NoDefect, c)))
        .collect())
}

fn subsample<T>(items: Vec<T>, keep: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if keep >= items.len() {
        return items;
    }
    let chosen: BTreeSet<usize> = rand::seq::index::sample(rng, items.len(), keep).into_iter().collect();
    items
        .into_iter()
        .enumerate()
        .filter_map(|(i, item)| chosen.contains(&i).then_some(item))
        .collect()
}

/// Balances pixel-carrying patches: each defect patch becomes its eight
/// [`augment_defect`] variants, tagged with the transform that produced them.
pub fn balance<R: Raster>(patches: Vec<PatchSample<R>>, seed: u64) -> Result<Vec<PatchSample<R>>> {
    let items = patches.into_iter().map(|p| (p.meta.label, p)).collect();
    let balanced = balance_with(items, seed, |p: PatchSample<R>| {
        let variants = augment_defect(&p.pixels)?;
        Ok(Transform::AUGMENTATIONS
            .iter()
            .zip(variants)
            .map(|(&t, pixels)| PatchSample {
                meta: LabeledPatch {
                    transform: (!t.is_identity()).then_some(t),
                    ..p.meta.clone()
                },
                pixels,
            })
            .collect())
    })?;
    Ok(balanced.into_iter().map(|(_, p)| p).collect())
}

/// Image-level fold assignment for grouped cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Validates an externally supplied assignment (e.g. from a manifest).
    pub fn from_assignment(k: usize, assignment: BTreeMap<String, usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Parameter(format!("fold count must be at least 2, got {k}")));
        }
        if let Some((id, f)) = assignment.iter().find(|(_, &f)| f >= k) {
            return Err(Error::Parameter(format!("image `{id}` has fold {f}, expected < {k}")));
        }
        Ok(Self { k, assignment })
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Shuffles the ids with `seed` and deals them round-robin into `k` folds.
pub fn group_kfold(image_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Parameter(format!("fold count must be at least 2, got {k}")));
    }
    if image_ids.len() < k {
        return Err(Error::Parameter(format!(
            "{} images cannot fill {k} folds",
            image_ids.len()
        )));
    }
    let unique: BTreeSet<&String> = image_ids.iter().collect();
    if unique.len() != image_ids.len() {
        return Err(Error::Parameter("image ids must be unique".into()));
    }
    let mut shuffled: Vec<&String> = image_ids.iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = shuffled
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i % k))
        .collect();
    Ok(FoldPlan { k, assignment })
}
