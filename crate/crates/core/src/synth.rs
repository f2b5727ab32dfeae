//! Procedural fuselage imagery with exact defect masks.
//!
//! A scene is painted skin under smooth illumination with sensor noise, dark
//! panel seams flanked by rivet rows, and a number of defects. Dents are
//! shaded bowls with pitting; scratches are anti-aliased polyline bands of
//! bright exposed metal with striations and gouges. The mask holds exactly
//! the pixels a defect primitive wrote to. Dirt speckle is painted last and
//! never enters the mask.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::image::{quantize, BinaryMask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    Scratch,
    Dent,
}

/// Inclusive `[lo, hi]` range for a randomly drawn quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo > 0.0) || self.hi < self.lo || !self.hi.is_finite() {
            return Err(Error::Parameter(format!(
                "{what} range must satisfy 0 < lo <= hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScratchSpec {
    /// Band width in pixels.
    pub width: Range,
    /// Polyline length in pixels.
    pub length: Range,
    /// Brightening applied over the band, in intensity levels.
    pub contrast: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DentSpec {
    pub radius: Range,
    /// Darkening at the bowl center, in intensity levels.
    pub contrast: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub rivet_spacing: usize,
    pub seam_count: usize,
    pub defect_count: usize,
    pub kinds: Vec<DefectKind>,
    pub scratch: ScratchSpec,
    pub dent: DentSpec,
    /// Amount of unmarked dirt speckle, 0 = freshly washed.
    pub dirt_level: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            rivet_spacing: 24,
            seam_count: 2,
            defect_count: 2,
            kinds: vec![DefectKind::Scratch, DefectKind::Dent],
            scratch: ScratchSpec {
                width: Range::new(46.0, 62.0),
                length: Range::new(160.0, 300.0),
                contrast: Range::new(45.0, 70.0),
            },
            dent: DentSpec {
                radius: Range::new(55.0, 90.0),
                contrast: Range::new(35.0, 60.0),
            },
            dirt_level: 0.0,
            seed: 7,
        }
    }
}

const PLACEMENT_GAP: f64 = 4.0;
const PLACEMENT_ATTEMPTS: usize = 5000;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.rivet_spacing == 0 {
            return Err(Error::Parameter("image size and rivet spacing must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dirt_level) {
            return Err(Error::Parameter(format!(
                "dirt level must be in [0, 1], got {}",
                self.dirt_level
            )));
        }
        if self.defect_count > 0 && self.kinds.is_empty() {
            return Err(Error::Parameter("defects requested but no defect kinds enabled".into()));
        }
        self.scratch.width.validate("scratch width")?;
        self.scratch.length.validate("scratch length")?;
        self.scratch.contrast.validate("scratch contrast")?;
        self.dent.radius.validate("dent radius")?;
        self.dent.contrast.validate("dent contrast")?;

        let min_side = self.width.min(self.height) as f64;
        for kind in &self.kinds {
            let extent = match kind {
                DefectKind::Dent => 2.0 * self.dent.radius.hi,
                DefectKind::Scratch => self.scratch.length.hi + self.scratch.width.hi,
            } + 2.0 * PLACEMENT_GAP;
            if self.defect_count > 0 && extent > min_side {
                return Err(Error::Parameter(format!(
                    "{kind:?} defects can span {extent:.0}px, larger than the {min_side:.0}px image"
                )));
            }
        }
        Ok(())
    }
}

/// A rendered scene plus a record of what was placed in it.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub image: RgbImage,
    pub mask: BinaryMask,
    pub defects: Vec<PlacedDefect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedDefect {
    pub kind: DefectKind,
    /// Center and radius of the bounding circle used for non-overlapping placement.
    pub center: (f64, f64),
    pub radius: f64,
}

/// Float canvas with a parallel record of defect writes.
struct Canvas {
    width: usize,
    height: usize,
    base: Vec<f64>,
    defect: Vec<f64>,
    written: Vec<bool>,
}

impl Canvas {
    fn add_defect(&mut self, x: usize, y: usize, delta: f64) {
        if delta != 0.0 {
            let i = y * self.width + x;
            self.defect[i] += delta;
            self.written[i] = true;
        }
    }

    /// Calls `f(x, y, dx, dy)` for pixels in the disc's bounding box, clipped to the image.
    fn for_box(&self, cx: f64, cy: f64, reach: f64, mut f: impl FnMut(usize, usize, f64, f64)) {
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil() as usize).min(self.width - 1);
        let y1 = ((cy + reach).ceil() as usize).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                f(x, y, x as f64 - cx, y as f64 - cy);
            }
        }
    }
}

/// Anti-aliased disc coverage for a pixel at distance `d` from the center.
fn disc_coverage(d: f64, radius: f64) -> f64 {
    (radius + 0.5 - d).clamp(0.0, 1.0)
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<Sample> {
    let scene = synth_scene(cfg)?;
    Sample::new(format!("synth_{:016x}", cfg.seed), scene.image, scene.mask)
}

pub fn synth_scene(cfg: &SynthConfig) -> Result<SynthScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.width, cfg.height);
    let mut canvas = Canvas {
        width: w,
        height: h,
        base: vec![0.0; w * h],
        defect: vec![0.0; w * h],
        written: vec![false; w * h],
    };

    paint_background(&mut canvas, &mut rng);
    paint_seams_and_rivets(&mut canvas, cfg, &mut rng);

    let mut placed: Vec<PlacedDefect> = Vec::with_capacity(cfg.defect_count);
    for _ in 0..cfg.defect_count {
        let kind = cfg.kinds[rng.gen_range(0..cfg.kinds.len())];
        let defect = match kind {
            DefectKind::Dent => place_dent(&mut canvas, cfg, &placed, &mut rng)?,
            DefectKind::Scratch => place_scratch(&mut canvas, cfg, &placed, &mut rng)?,
        };
        placed.push(defect);
    }

    let mut total: Vec<f64> = canvas.base.iter().zip(&canvas.defect).map(|(b, d)| b + d).collect();
    if cfg.dirt_level > 0.0 {
        paint_dirt(&mut total, w, h, cfg.dirt_level, &mut rng);
    }

    let tint = [0.985, 1.0, 1.025];
    let mut data = Vec::with_capacity(w * h * 3);
    for v in &total {
        for t in tint {
            data.push(quantize(v * t));
        }
    }
    let mask_data = canvas.written.iter().map(|&b| u8::from(b)).collect();
    Ok(SynthScene {
        image: RgbImage::new(w, h, data)?,
        mask: BinaryMask::new(w, h, mask_data)?,
        defects: placed,
    })
}

fn paint_background(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    let level = rng.gen_range(135.0..165.0);
    let grad_amp = rng.gen_range(10.0..30.0);
    let grad_dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let wave_dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let wave_period = rng.gen_range(300.0..700.0);
    let wave_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, 2.0).expect("valid normal");
    let diag = (w * w + h * h).sqrt();

    for y in 0..canvas.height {
        for x in 0..canvas.width {
            let (xf, yf) = (x as f64 - w / 2.0, y as f64 - h / 2.0);
            let along = (xf * grad_dir.cos() + yf * grad_dir.sin()) / diag;
            let wave = ((xf * wave_dir.cos() + yf * wave_dir.sin()) * std::f64::consts::TAU / wave_period
                + wave_phase)
                .sin();
            canvas.base[y * canvas.width + x] = level + grad_amp * along + 6.0 * wave + noise.sample(rng);
        }
    }
}

fn paint_seams_and_rivets(canvas: &mut Canvas, cfg: &SynthConfig, rng: &mut ChaCha8Rng) {
    let (w, h) = (canvas.width, canvas.height);
    for i in 0..cfg.seam_count {
        let horizontal = i % 2 == 0;
        let span = if horizontal { h } else { w } as f64;
        let pos = rng.gen_range(0.15 * span..=0.85 * span);
        let depth = rng.gen_range(25.0..40.0);

        for y in 0..h {
            for x in 0..w {
                let d = (if horizontal { y as f64 } else { x as f64 } - pos).abs();
                let cov = (2.0 - d).clamp(0.0, 1.0);
                if cov > 0.0 {
                    canvas.base[y * w + x] -= depth * cov;
                }
            }
        }

        let length = if horizontal { w } else { h };
        let phase = rng.gen_range(0..cfg.rivet_spacing);
        for side in [-14.0, 14.0] {
            let offset = pos + side;
            let mut t = phase;
            while t < length {
                let (cx, cy) = if horizontal {
                    (t as f64, offset)
                } else {
                    (offset, t as f64)
                };
                let bright = rng.gen_range(16.0..26.0);
                stamp_rivet(canvas, cx, cy, bright);
                t += cfg.rivet_spacing;
            }
        }
    }
}

fn stamp_rivet(canvas: &mut Canvas, cx: f64, cy: f64, bright: f64) {
    let r = 3.5;
    let (w, h) = (canvas.width, canvas.height);
    if cx < -5.0 || cy < -5.0 || cx > w as f64 + 5.0 || cy > h as f64 + 5.0 {
        return;
    }
    let mut deltas = Vec::new();
    canvas.for_box(cx, cy, r + 1.5, |x, y, dx, dy| {
        let d = (dx * dx + dy * dy).sqrt();
        let v = if d < r {
            bright * (1.0 - (d / r).powi(2))
        } else if d < r + 1.0 {
            -8.0
        } else {
            0.0
        };
        deltas.push((x, y, v));
    });
    for (x, y, v) in deltas {
        canvas.base[y * w + x] += v;
    }
}

fn overlaps(placed: &[PlacedDefect], cx: f64, cy: f64, radius: f64) -> bool {
    placed.iter().any(|p| {
        let (dx, dy) = (p.center.0 - cx, p.center.1 - cy);
        (dx * dx + dy * dy).sqrt() < p.radius + radius + PLACEMENT_GAP
    })
}

fn inside(canvas: &Canvas, cx: f64, cy: f64, radius: f64) -> bool {
    let m = radius + PLACEMENT_GAP;
    cx - m >= 0.0 && cy - m >= 0.0 && cx + m <= canvas.width as f64 - 1.0 && cy + m <= canvas.height as f64 - 1.0
}

fn placement_error(kind: DefectKind) -> Error {
    Error::Parameter(format!(
        "could not place a non-overlapping {kind:?} after {PLACEMENT_ATTEMPTS} attempts; reduce defect count or size"
    ))
}

/// Scatters dark pits whose centers fall where `accept` holds.
fn pits(
    rng: &mut ChaCha8Rng,
    cx: f64,
    cy: f64,
    reach: f64,
    count: usize,
    mut accept: impl FnMut(f64, f64) -> bool,
) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < count * 20 {
        tries += 1;
        let px = cx + rng.gen_range(-reach..=reach);
        let py = cy + rng.gen_range(-reach..=reach);
        if accept(px, py) {
            let radius = rng.gen_range(1.8..3.5);
            let depth = rng.gen_range(30.0..60.0);
            out.push((px, py, radius, depth));
        }
    }
    out
}

fn stamp_pits(canvas: &mut Canvas, pits: &[(f64, f64, f64, f64)]) {
    for &(px, py, radius, depth) in pits {
        let mut deltas = Vec::new();
        canvas.for_box(px, py, radius + 1.0, |x, y, dx, dy| {
            let cov = disc_coverage((dx * dx + dy * dy).sqrt(), radius);
            deltas.push((x, y, -depth * cov));
        });
        for (x, y, v) in deltas {
            canvas.add_defect(x, y, v);
        }
    }
}

fn place_dent(
    canvas: &mut Canvas,
    cfg: &SynthConfig,
    placed: &[PlacedDefect],
    rng: &mut ChaCha8Rng,
) -> Result<PlacedDefect> {
    let radius = cfg.dent.radius.draw(rng);
    let contrast = cfg.dent.contrast.draw(rng);
    let (cx, cy) = (0..PLACEMENT_ATTEMPTS)
        .map(|_| {
            (
                rng.gen_range(0.0..canvas.width as f64),
                rng.gen_range(0.0..canvas.height as f64),
            )
        })
        .find(|&(x, y)| inside(canvas, x, y, radius + 1.0) && !overlaps(placed, x, y, radius + 1.0))
        .ok_or_else(|| placement_error(DefectKind::Dent))?;
    let light: f64 = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut deltas = Vec::new();
    canvas.for_box(cx, cy, radius + 1.0, |x, y, dx, dy| {
        let d = (dx * dx + dy * dy).sqrt();
        if d < radius {
            let bowl = 0.35 + 0.65 * (1.0 - (d / radius).powi(2));
            let shade = 0.3 * (dx * light.cos() + dy * light.sin()) / radius;
            deltas.push((x, y, -contrast * (bowl + shade)));
        }
    });
    for (x, y, v) in deltas {
        canvas.add_defect(x, y, v);
    }

    let area = std::f64::consts::PI * radius * radius;
    let inner = radius - 4.5;
    let list = pits(rng, cx, cy, inner, (area / 90.0) as usize, |px, py| {
        ((px - cx).powi(2) + (py - cy).powi(2)).sqrt() < inner
    });
    stamp_pits(canvas, &list);

    Ok(PlacedDefect {
        kind: DefectKind::Dent,
        center: (cx, cy),
        radius: radius + 1.0,
    })
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * abx, a.1 + t * aby);
    // signed offset across the segment, used for striations
    let len = len2.sqrt().max(1e-12);
    let across = ((p.0 - a.0) * -aby + (p.1 - a.1) * abx) / len;
    (((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt(), across)
}

fn place_scratch(
    canvas: &mut Canvas,
    cfg: &SynthConfig,
    placed: &[PlacedDefect],
    rng: &mut ChaCha8Rng,
) -> Result<PlacedDefect> {
    let width = cfg.scratch.width.draw(rng);
    let length = cfg.scratch.length.draw(rng);
    let contrast = cfg.scratch.contrast.draw(rng);
    let segments = rng.gen_range(2..=4usize);

    // Polyline relative to the origin, then centered on its bounding box.
    let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut pts = vec![(0.0f64, 0.0f64)];
    for _ in 0..segments {
        let step = length / segments as f64;
        let &(x, y) = pts.last().expect("non-empty");
        pts.push((x + step * heading.cos(), y + step * heading.sin()));
        heading += rng.gen_range(-0.5..0.5);
    }
    let (minx, maxx) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (miny, maxy) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (mx, my) = ((minx + maxx) / 2.0, (miny + maxy) / 2.0);
    for p in &mut pts {
        *p = (p.0 - mx, p.1 - my);
    }
    let half_diag = ((maxx - minx).powi(2) + (maxy - miny).powi(2)).sqrt() / 2.0;
    let radius = half_diag + width / 2.0 + 1.5;

    let (cx, cy) = (0..PLACEMENT_ATTEMPTS)
        .map(|_| {
            (
                rng.gen_range(0.0..canvas.width as f64),
                rng.gen_range(0.0..canvas.height as f64),
            )
        })
        .find(|&(x, y)| inside(canvas, x, y, radius) && !overlaps(placed, x, y, radius))
        .ok_or_else(|| placement_error(DefectKind::Scratch))?;
    let pts: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 + cx, p.1 + cy)).collect();
    let nearest = |x: f64, y: f64| {
        pts.windows(2)
            .map(|s| segment_distance((x, y), s[0], s[1]))
            .fold((f64::MAX, 0.0), |best, d| if d.0 < best.0 { d } else { best })
    };

    let half = width / 2.0;
    let stripe_period = rng.gen_range(4.0..6.0);
    let mut deltas = Vec::new();
    canvas.for_box(cx, cy, radius, |x, y, _, _| {
        let (d, across) = nearest(x as f64, y as f64);
        let cov = (half + 0.5 - d).clamp(0.0, 1.0);
        if cov > 0.0 {
            let stripe = (across * std::f64::consts::TAU / stripe_period).sin();
            deltas.push((x, y, cov * contrast * (0.75 + 0.25 * stripe)));
        }
    });
    for (x, y, v) in deltas {
        canvas.add_defect(x, y, v);
    }

    let area = length * width;
    let list = pits(rng, cx, cy, radius, (area / 110.0) as usize, |px, py| nearest(px, py).0 < half - 4.5);
    stamp_pits(canvas, &list);

    Ok(PlacedDefect {
        kind: DefectKind::Scratch,
        center: (cx, cy),
        radius,
    })
}

/// Grime: clusters of fine dark speckle plus a sparse uniform sprinkle.
fn paint_dirt(total: &mut [f64], w: usize, h: usize, level: f64, rng: &mut ChaCha8Rng) {
    let megapixels = (w * h) as f64 / 1.0e6;
    let clusters = (level * 24.0 * megapixels).round() as usize;
    let mut spots: Vec<(f64, f64)> = Vec::new();
    for _ in 0..clusters {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let r: f64 = rng.gen_range(40.0..90.0);
        let n = (std::f64::consts::PI * r * r / 25.0) as usize;
        for _ in 0..n {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = r * rng.gen_range(0.0f64..1.0).sqrt();
            spots.push((cx + d * a.cos(), cy + d * a.sin()));
        }
    }
    let sprinkle = (level * (w * h) as f64 / 1500.0) as usize;
    for _ in 0..sprinkle {
        spots.push((rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)));
    }

    for (sx, sy) in spots {
        let radius = rng.gen_range(0.5..1.0);
        let depth = rng.gen_range(50.0..90.0);
        let x0 = (sx - 2.5).floor().max(0.0) as usize;
        let y0 = (sy - 2.5).floor().max(0.0) as usize;
        let x1 = ((sx + 2.5).ceil().max(0.0) as usize).min(w - 1);
        let y1 = ((sy + 2.5).ceil().max(0.0) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - sx).powi(2) + (y as f64 - sy).powi(2)).sqrt();
                total[y * w + x] -= depth * disc_coverage(d, radius);
            }
        }
    }
}

/// Deterministic per-image seed derived from a dataset seed (SplitMix64 step).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates `count` samples named `synth_000`, `synth_001`, ...
pub fn generate_dataset(cfg: &SynthConfig, count: usize) -> Result<Vec<Sample>> {
    (0..count)
        .map(|i| {
            let per = SynthConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            let scene = synth_scene(&per)?;
            Sample::new(format!("synth_{i:03}"), scene.image, scene.mask)
        })
        .collect()
}
