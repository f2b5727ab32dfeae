//! Upright SURF descriptor for a whole patch.
//!
//! A single keypoint sits at the patch center with scale `s = side / 20`, so
//! the `20s` descriptor window spans the patch. The window is sampled on a
//! 20×20 grid with spacing `s`; at each sample, Haar responses of size `2s`
//! are weighted by a Gaussian (σ = 3.3s) and accumulated per 4×4 subregion
//! as (Σdx, Σdy, Σ|dx|, Σ|dy|). Subregions are ordered row-major.

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::image::GrayImage;

pub const SURF_DESCRIPTOR_LEN: usize = 64;
pub const SURF_MIN_SIDE: usize = 40;

const GRID: usize = 20;
const SUB: usize = 5;

/// Sum over a `w`×`h` block; blocks of equal shape over equal pixels give
/// bit-identical sums.
fn block_sum(img: &GrayImage, x: usize, y: usize, w: usize, h: usize) -> f64 {
    let mut acc = 0.0;
    for yy in y..y + h {
        for xx in x..x + w {
            acc += img.get(xx, yy);
        }
    }
    acc
}

pub fn surf_patch_descriptor(patch: &GrayImage) -> Result<FeatureVector> {
    let (w, h) = (patch.width(), patch.height());
    if w != h {
        return Err(Error::Parameter(format!("SURF descriptor needs a square patch, got {w}x{h}")));
    }
    if w < SURF_MIN_SIDE {
        return Err(Error::Parameter(format!(
            "SURF descriptor needs a patch of at least {SURF_MIN_SIDE}px, got {w}"
        )));
    }
    let n = w;
    let s = n as f64 / 20.0;
    let haar = 2 * (s.round() as usize).max(1);
    let half = haar / 2;
    let center = n as f64 / 2.0;
    let sigma = 3.3 * s;
    let max_start = (n - haar) as f64;

    let mut desc = vec![0.0; SURF_DESCRIPTOR_LEN];
    for j in 0..GRID {
        let py = center + (j as f64 - 9.5) * s;
        let y0 = (py - half as f64).round().clamp(0.0, max_start) as usize;
        for i in 0..GRID {
            let px = center + (i as f64 - 9.5) * s;
            let x0 = (px - half as f64).round().clamp(0.0, max_start) as usize;

            let dx = block_sum(patch, x0 + half, y0, half, haar) - block_sum(patch, x0, y0, half, haar);
            let dy = block_sum(patch, x0, y0 + half, haar, half) - block_sum(patch, x0, y0, haar, half);
            let (ox, oy) = (px - center, py - center);
            let g = (-(ox * ox + oy * oy) / (2.0 * sigma * sigma)).exp();
            let (dx, dy) = (g * dx, g * dy);

            let base = ((j / SUB) * 4 + i / SUB) * 4;
            desc[base] += dx;
            desc[base + 1] += dy;
            desc[base + 2] += dx.abs();
            desc[base + 3] += dy.abs();
        }
    }

    let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        desc.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(FeatureVector {
        kind: FeatureKind::Surf,
        values: desc,
    })
}
