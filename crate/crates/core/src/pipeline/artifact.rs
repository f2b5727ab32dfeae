//! Model files: `FDSV`, a little-endian u32 version, a little-endian u32
//! header length, a JSON header, then little-endian f64 standardizer means,
//! standardizer stds, weights and bias.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::svm::{LinearSvmModel, Standardizer, TrainReport};

use super::PipelineConfig;

pub const MODEL_MAGIC: [u8; 4] = *b"FDSV";
pub const MODEL_VERSION: u32 = 1;

/// A trained classifier together with the configuration it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub config: PipelineConfig,
    pub model: LinearSvmModel,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: PipelineConfig,
    feature: FeatureKind,
    dimension: usize,
    c: f64,
    training: TrainReport,
}

impl ModelArtifact {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            feature: m.kind,
            dimension: m.dimension(),
            c: m.c,
            training: m.report,
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * (3 * m.dimension() + 1));
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in m
            .standardizer
            .mean
            .iter()
            .chain(&m.standardizer.std)
            .chain(&m.weights)
            .chain(std::iter::once(&m.bias))
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("model file: {what}"));
        if bytes.len() < 12 || bytes[..4] != MODEL_MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let header_len = word(8) as usize;
        let body = bytes.get(12..).unwrap_or_default();
        if body.len() < header_len {
            return Err(bad("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..header_len]).map_err(|e| bad(&format!("header: {e}")))?;
        let d = header.dimension;
        let numbers = &body[header_len..];
        if numbers.len() != 8 * (3 * d + 1) {
            return Err(bad(&format!(
                "expected {} numeric bytes for dimension {d}, found {}",
                8 * (3 * d + 1),
                numbers.len()
            )));
        }
        let values: Vec<f64> = numbers
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        if header.config.feature != header.feature {
            return Err(bad("config and model disagree on the feature kind"));
        }
        Ok(Self {
            config: header.config,
            model: LinearSvmModel {
                kind: header.feature,
                weights: values[2 * d..3 * d].to_vec(),
                bias: values[3 * d],
                c: header.c,
                standardizer: Standardizer {
                    mean: values[..d].to_vec(),
                    std: values[d..2 * d].to_vec(),
                },
                report: header.training,
            },
        })
    }
}

pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, artifact.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_bytes(&bytes)
}
