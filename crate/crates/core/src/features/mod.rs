//! Fixed-length patch descriptors.

mod embedding;
mod histogram;
mod lbp;
mod surf_descriptor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, GrayImage, RgbImage};

pub use embedding::{load_embeddings, write_embeddings, EmbeddingStore};
pub use histogram::{hsv_histogram, rgb_histogram, HISTOGRAM_BINS};
pub use lbp::{lbp_code, lbp_histogram, uniform_bin, LBP_BINS};
pub use surf_descriptor::{surf_patch_descriptor, SURF_DESCRIPTOR_LEN, SURF_MIN_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "rgb-hist")]
    RgbHist,
    #[serde(rename = "hsv-hist")]
    HsvHist,
    #[serde(rename = "lbp")]
    Lbp,
    #[serde(rename = "surf")]
    Surf,
    /// Vectors computed outside this crate (e.g. CNN activations) and read from disk.
    #[serde(rename = "external")]
    External,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::RgbHist,
        FeatureKind::HsvHist,
        FeatureKind::Lbp,
        FeatureKind::Surf,
        FeatureKind::External,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::RgbHist => "rgb-hist",
            FeatureKind::HsvHist => "hsv-hist",
            FeatureKind::Lbp => "lbp",
            FeatureKind::Surf => "surf",
            FeatureKind::External => "external",
        }
    }

    /// Descriptor length; `None` for external vectors, whose length comes from their manifest.
    pub fn fixed_dimension(self) -> Option<usize> {
        match self {
            FeatureKind::RgbHist | FeatureKind::HsvHist => Some(3 * HISTOGRAM_BINS),
            FeatureKind::Lbp => Some(LBP_BINS),
            FeatureKind::Surf => Some(SURF_DESCRIPTOR_LEN),
            FeatureKind::External => None,
        }
    }

    /// Whether the descriptor is computed from intensity rather than color.
    pub fn uses_gray(self) -> bool {
        matches!(self, FeatureKind::Lbp | FeatureKind::Surf)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown feature kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self> {
        if let Some(d) = kind.fixed_dimension() {
            if values.len() != d {
                return Err(Error::Parameter(format!(
                    "{kind} vectors have {d} entries, got {}",
                    values.len()
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{kind} vector has non-finite entries")));
        }
        Ok(Self { kind, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes an intensity-based descriptor from a grayscale patch.
pub fn extract_gray(patch: &GrayImage, kind: FeatureKind) -> Result<FeatureVector> {
    match kind {
        FeatureKind::Lbp => lbp_histogram(patch),
        FeatureKind::Surf => surf_patch_descriptor(patch),
        other => Err(Error::Config(format!("{other} descriptors need a color patch"))),
    }
}

/// Computes any descriptor from a color patch. External vectors are looked
/// up by `key` in `embeddings`.
pub fn extract(
    patch: &RgbImage,
    kind: FeatureKind,
    embeddings: Option<&EmbeddingStore>,
    key: &str,
) -> Result<FeatureVector> {
    match kind {
        FeatureKind::RgbHist => Ok(rgb_histogram(patch)),
        FeatureKind::HsvHist => Ok(hsv_histogram(patch)),
        FeatureKind::Lbp | FeatureKind::Surf => extract_gray(&to_grayscale(patch), kind),
        FeatureKind::External => embeddings
            .ok_or_else(|| Error::Config("external features need an embeddings manifest".into()))?
            .lookup(key),
    }
}
