//! Patch-based surface defect detection for aircraft fuselage imagery.
//!
//! Images are split into fixed-size square patches, each patch is labeled
//! from a ground-truth mask, described by a feature vector and classified
//! by a linear SVM. An optional fast-Hessian keypoint gate restricts
//! classification to patches near interest points.

pub mod dataset;
pub mod error;
pub mod features;
pub mod image;
pub mod manifest;
pub mod pipeline;
pub mod surf;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
