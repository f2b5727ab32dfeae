use crate::features::{FeatureKind, FeatureVector};
use crate::image::RgbImage;

/// Bins per channel for the color histograms.
pub const HISTOGRAM_BINS: usize = 32;

/// Hexcone H, S, V bins computed on the 8-bit channels, so values on a bin
/// edge never round into the bin below.
fn hsv_bins(px: &[u8]) -> [usize; 3] {
    let (r, g, b) = (u32::from(px[0]), u32::from(px[1]), u32::from(px[2]));
    let n = HISTOGRAM_BINS as u32;
    let max = r.max(g).max(b);
    let delta = max - r.min(g).min(b);
    let clamp = |v: u32| v.min(n - 1) as usize;
    let h = if delta == 0 {
        0
    } else {
        // hue / 360° = t / (6 delta)
        let t = if max == r {
            (6 * delta + g - b) % (6 * delta)
        } else if max == g {
            2 * delta + b - r
        } else {
            4 * delta + r - g
        };
        clamp(n * t / (6 * delta))
    };
    let s = if max == 0 { 0 } else { clamp(n * delta / max) };
    [h, s, clamp(n * max / 255)]
}

fn l1_normalize(mut counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        counts.iter_mut().for_each(|c| *c /= total);
    }
    counts
}

/// R‖G‖B histograms, 32 uniform bins each over `[0, 256)`, normalized to sum 1.
pub fn rgb_histogram(patch: &RgbImage) -> FeatureVector {
    let mut counts = vec![0.0; 3 * HISTOGRAM_BINS];
    for px in patch.data().chunks_exact(3) {
        for (c, &v) in px.iter().enumerate() {
            counts[c * HISTOGRAM_BINS + (v as usize >> 3)] += 1.0;
        }
    }
    FeatureVector {
        kind: FeatureKind::RgbHist,
        values: l1_normalize(counts),
    }
}

/// H‖S‖V histograms with 32 uniform bins over `[0, 360)`, `[0, 1]`, `[0, 1]`.
pub fn hsv_histogram(patch: &RgbImage) -> FeatureVector {
    let mut counts = vec![0.0; 3 * HISTOGRAM_BINS];
    for px in patch.data().chunks_exact(3) {
        for (c, bin) in hsv_bins(px).into_iter().enumerate() {
            counts[c * HISTOGRAM_BINS + bin] += 1.0;
        }
    }
    FeatureVector {
        kind: FeatureKind::HsvHist,
        values: l1_normalize(counts),
    }
}
