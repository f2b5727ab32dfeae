//! Uniform local binary patterns, 8 neighbours on a unit circle.
//!
//! Neighbour `p` sits at angle `45° · p` counter-clockwise from the +x axis
//! (image rows grow downward). Bit `p` is set when the neighbour is at least
//! as bright as the center. The four diagonal neighbours are bilinearly
//! interpolated.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::image::{lerp, GrayImage};

/// 58 uniform patterns plus one bin for everything else.
pub const LBP_BINS: usize = 59;

const DIAG: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn circular_transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

fn uniform_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [(LBP_BINS - 1) as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if circular_transitions(code) <= 2 {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, LBP_BINS - 1);
        table
    })
}

/// Histogram bin for an 8-bit pattern: uniform codes in increasing numeric
/// order take bins 0..58, non-uniform codes share bin 58.
pub fn uniform_bin(code: u8) -> usize {
    uniform_table()[code as usize] as usize
}

#[inline]
fn diagonal(img: &GrayImage, x: usize, y: usize, right: bool, down: bool) -> f64 {
    // Sample at (x ± DIAG, y ± DIAG); the interpolation cell always has the
    // center pixel as one corner.
    let (x0, tx) = if right { (x, DIAG) } else { (x - 1, 1.0 - DIAG) };
    let (y0, ty) = if down { (y, DIAG) } else { (y - 1, 1.0 - DIAG) };
    let top = lerp(img.get(x0, y0), img.get(x0 + 1, y0), tx);
    let bottom = lerp(img.get(x0, y0 + 1), img.get(x0 + 1, y0 + 1), tx);
    lerp(top, bottom, ty)
}

/// Pattern at an interior pixel (`1 <= x < w-1`, `1 <= y < h-1`).
pub fn lbp_code(img: &GrayImage, x: usize, y: usize) -> u8 {
    let c = img.get(x, y);
    let neighbours = [
        img.get(x + 1, y),
        diagonal(img, x, y, true, false),
        img.get(x, y - 1),
        diagonal(img, x, y, false, false),
        img.get(x - 1, y),
        diagonal(img, x, y, false, true),
        img.get(x, y + 1),
        diagonal(img, x, y, true, true),
    ];
    neighbours
        .iter()
        .enumerate()
        .fold(0u8, |code, (p, &v)| if v >= c { code | (1 << p) } else { code })
}

/// Normalized histogram of uniform patterns over the patch interior.
pub fn lbp_histogram(patch: &GrayImage) -> Result<FeatureVector> {
    let (w, h) = (patch.width(), patch.height());
    if w < 3 || h < 3 {
        return Err(Error::Parameter(format!("LBP needs at least a 3x3 patch, got {w}x{h}")));
    }
    let mut counts = vec![0.0; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            counts[uniform_bin(lbp_code(patch, x, y))] += 1.0;
        }
    }
    let total = ((w - 2) * (h - 2)) as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(FeatureVector {
        kind: FeatureKind::Lbp,
        values: counts,
    })
}
