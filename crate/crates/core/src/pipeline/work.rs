use crate::dataset::{patch_key, Transform};
use crate::error::{Error, Result};
use crate::features::{extract, extract_gray, EmbeddingStore, FeatureKind, FeatureVector};
use crate::image::{gaussian_blur, gaussian_blur_rgb, to_grayscale, Anchor, GrayImage, RgbImage};

use super::{Mode, PipelineConfig};

/// Working copies of one image after mode-dependent preprocessing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    /// Grayscale working image, used for detection, gray descriptors and
    /// intensity variation.
    pub gray: GrayImage,
    /// Color working image, kept only for color descriptors.
    pub color: Option<RgbImage>,
}

impl Prepared {
    pub fn new(id: impl Into<String>, image: &RgbImage, cfg: &PipelineConfig) -> Result<Self> {
        let mut gray = to_grayscale(image);
        let color_kind = matches!(cfg.feature, FeatureKind::RgbHist | FeatureKind::HsvHist);
        let mut color = color_kind.then(|| image.clone());
        if cfg.mode == Mode::Unwashed {
            gray = gaussian_blur(&gray, cfg.sigma)?;
            if let Some(c) = color.as_mut() {
                *c = gaussian_blur_rgb(c, cfg.sigma)?;
            }
        }
        Ok(Self {
            id: id.into(),
            gray,
            color,
        })
    }

    pub fn width(&self) -> usize {
        self.gray.width()
    }

    pub fn height(&self) -> usize {
        self.gray.height()
    }

    /// Descriptor of the patch at `anchor`, optionally after a training transform.
    pub fn features(
        &self,
        anchor: Anchor,
        transform: Option<Transform>,
        cfg: &PipelineConfig,
        embeddings: Option<&EmbeddingStore>,
    ) -> Result<FeatureVector> {
        let rect = anchor.rect(cfg.patch_size);
        let transform = transform.filter(|t| !t.is_identity());
        match cfg.feature {
            FeatureKind::External => {
                let store = embeddings.ok_or_else(|| {
                    Error::Config("external features need an embeddings manifest".into())
                })?;
                store.lookup(&patch_key(&self.id, anchor, transform))
            }
            FeatureKind::Lbp | FeatureKind::Surf => {
                let mut patch = self.gray.crop(rect)?;
                if let Some(t) = transform {
                    patch = t.apply(&patch)?;
                }
                extract_gray(&patch, cfg.feature)
            }
            FeatureKind::RgbHist | FeatureKind::HsvHist => {
                let color = self
                    .color
                    .as_ref()
                    .ok_or_else(|| Error::Config("color working image was not prepared".into()))?;
                let mut patch = color.crop(rect)?;
                if let Some(t) = transform {
                    patch = t.apply(&patch)?;
                }
                extract(&patch, cfg.feature, None, "")
            }
        }
    }
}
