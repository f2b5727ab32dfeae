//! Raster primitives: color conversion, summed-area tables, Gaussian
//! filtering, patch tiling and the lossless/bilinear transforms used for
//! augmentation.
//!
//! Images are stored row-major. Color images keep 8-bit channels; grayscale
//! images hold intensities in `[0, 255]` at `f64` precision and are only
//! quantized again when written to disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BT.601 luma weights used for every color-to-gray conversion.
pub const GRAY_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Parameter(format!(
                "rgb buffer has {} bytes, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn crop(&self, r: Rect) -> Result<RgbImage> {
        r.check_inside(self.width, self.height)?;
        let mut data = Vec::with_capacity(r.w * r.h * 3);
        for y in r.y..r.y + r.h {
            let start = (y * self.width + r.x) * 3;
            data.extend_from_slice(&self.data[start..start + r.w * 3]);
        }
        Ok(RgbImage {
            width: r.w,
            height: r.h,
            data,
        })
    }

    /// Splits the image into three grayscale planes (R, G, B).
    pub fn channels(&self) -> [GrayImage; 3] {
        let plane = |c: usize| GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect(),
        };
        [plane(0), plane(1), plane(2)]
    }

    /// Reassembles planes produced by [`RgbImage::channels`], rounding to 8 bits.
    pub fn from_channels(planes: &[GrayImage; 3]) -> Result<RgbImage> {
        let (w, h) = (planes[0].width, planes[0].height);
        if planes.iter().any(|p| p.width != w || p.height != h) {
            return Err(Error::Parameter("channel planes differ in size".into()));
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for i in 0..w * h {
            for p in planes {
                data.push(quantize(p.data[i]));
            }
        }
        RgbImage::new(w, h, data)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| image_error(path, source))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        RgbImage::new(w as usize, h as usize, rgb.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| image_error(path, source))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "gray buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::Data(format!("gray value {bad} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn crop(&self, r: Rect) -> Result<GrayImage> {
        r.check_inside(self.width, self.height)?;
        let mut data = Vec::with_capacity(r.w * r.h);
        for y in r.y..r.y + r.h {
            let start = y * self.width + r.x;
            data.extend_from_slice(&self.data[start..start + r.w]);
        }
        Ok(GrayImage {
            width: r.w,
            height: r.h,
            data,
        })
    }

    /// Adds `offset` to every pixel, clamping into `[0, 255]`.
    pub fn shifted(&self, offset: f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| (v + offset).clamp(0.0, 255.0)).collect(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        image::save_buffer(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|source| image_error(path, source))
    }
}

/// Binary raster where 1 marks a defect pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "mask buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Data("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn count_in(&self, r: Rect) -> Result<usize> {
        r.check_inside(self.width, self.height)?;
        Ok((r.y..r.y + r.h)
            .map(|y| {
                let row = &self.data[y * self.width + r.x..y * self.width + r.x + r.w];
                row.iter().map(|&v| v as usize).sum::<usize>()
            })
            .sum())
    }

    /// Reads a single-channel mask; any value above 127 is a defect pixel.
    pub fn load_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| image_error(path, source))?;
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        let data = luma.into_raw().into_iter().map(|v| u8::from(v > 127)).collect();
        BinaryMask::new(w as usize, h as usize, data)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().map(|&v| v * 255).collect();
        image::save_buffer(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|source| image_error(path, source))
    }
}

fn image_error(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Axis-aligned rectangle; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(Error::Bounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Summed-area table with a zero first row and column.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table entry at `(row, col)`: the sum of all source pixels strictly
    /// above and left of that position.
    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.table[row * (self.width + 1) + col]
    }

    /// Row `row` of the table, `width + 1` entries.
    #[inline]
    pub(crate) fn table_row(&self, row: usize) -> &[f64] {
        let stride = self.width + 1;
        &self.table[row * stride..(row + 1) * stride]
    }

    pub fn box_sum(&self, r: Rect) -> Result<f64> {
        r.check_inside(self.width, self.height)?;
        Ok(self.box_sum_unchecked(r.x, r.y, r.w, r.h))
    }

    /// Caller guarantees the box lies inside the source image.
    #[inline]
    pub(crate) fn box_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        let stride = self.width + 1;
        let top = y * stride;
        let bottom = (y + h) * stride;
        self.table[bottom + x + w] - self.table[top + x + w] - self.table[bottom + x] + self.table[top + x]
    }
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    // per-channel products, summed in the same order as the direct formula
    let mut lut = [[0.0; 256]; 3];
    for (c, table) in lut.iter_mut().enumerate() {
        for (v, slot) in table.iter_mut().enumerate() {
            *slot = GRAY_WEIGHTS[c] * v as f64;
        }
    }
    let mut data = vec![0.0; img.width * img.height];
    for (out, p) in data.iter_mut().zip(img.data.chunks_exact(3)) {
        let v = lut[0][p[0] as usize] + lut[1][p[1] as usize] + lut[2][p[2] as usize];
        *out = v.min(255.0);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

pub fn build_integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width, img.height);
    let stride = w + 1;
    let mut table = vec![0.0; stride * (h + 1)];
    for (y, src) in img.data.chunks_exact(w.max(1)).take(h).enumerate() {
        let (done, rest) = table.split_at_mut((y + 1) * stride);
        let prev = &done[y * stride + 1..];
        let cur = &mut rest[1..stride];
        let mut row_sum = 0.0;
        for ((c, &p), &v) in cur.iter_mut().zip(prev).zip(src) {
            row_sum += v;
            *c = p + row_sum;
        }
    }
    IntegralImage {
        width: w,
        height: h,
        table,
    }
}

pub fn box_sum(ii: &IntegralImage, r: Rect) -> Result<f64> {
    ii.box_sum(r)
}

/// Maps any integer coordinate into `[0, n)` by mirror reflection with the
/// edge sample repeated (`-1 -> 0`, `n -> n - 1`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Normalized 1-D Gaussian of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width, img.height);

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - radius, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 255.0));
    Ok(GrayImage {
        width: w,
        height: h,
        data: out,
    })
}

/// Blurs each color channel independently and rounds back to 8 bits.
pub fn gaussian_blur_rgb(img: &RgbImage, sigma: f64) -> Result<RgbImage> {
    let [r, g, b] = img.channels();
    let planes = [
        gaussian_blur(&r, sigma)?,
        gaussian_blur(&g, sigma)?,
        gaussian_blur(&b, sigma)?,
    ];
    RgbImage::from_channels(&planes)
}

/// Hexcone RGB to HSV. Hue is in degrees `[0, 360)` and is 0 for achromatic
/// pixels; saturation and value are in `[0, 1]`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (f64::from(r) / 255.0, f64::from(g) / 255.0, f64::from(b) / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, v);
    }
    let mut h = if max == rf {
        60.0 * ((gf - bf) / delta)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    (h, s, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
}

impl Anchor {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn rect(&self, patch_size: usize) -> Rect {
        Rect::new(self.col, self.row, patch_size, patch_size)
    }
}

/// Square tiling of an image. Anchors are stored row-major; when a dimension
/// is not a multiple of the patch size the last row/column of anchors is
/// pulled back to `dimension - patch_size`, so border patches overlap their
/// neighbours instead of being truncated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    patch_size: usize,
    image_width: usize,
    image_height: usize,
    row_starts: Vec<usize>,
    col_starts: Vec<usize>,
}

fn tile_starts(dim: usize, size: usize) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..).map(|i| i * size).take_while(|s| s + size <= dim).collect();
    if starts.last().map_or(true, |&s| s + size < dim) {
        starts.push(dim - size);
    }
    starts
}

pub fn partition(width: usize, height: usize, patch_size: usize) -> Result<PatchGrid> {
    if patch_size == 0 {
        return Err(Error::Parameter("patch size must be positive".into()));
    }
    if width < patch_size || height < patch_size {
        return Err(Error::Parameter(format!(
            "{width}x{height} image is smaller than the {patch_size}px patch"
        )));
    }
    Ok(PatchGrid {
        patch_size,
        image_width: width,
        image_height: height,
        row_starts: tile_starts(height, patch_size),
        col_starts: tile_starts(width, patch_size),
    })
}

impl PatchGrid {
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn rows(&self) -> usize {
        self.row_starts.len()
    }

    pub fn cols(&self) -> usize {
        self.col_starts.len()
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn anchor(&self, index: usize) -> Anchor {
        let (r, c) = (index / self.cols(), index % self.cols());
        Anchor::new(self.row_starts[r], self.col_starts[c])
    }

    pub fn anchors(&self) -> impl Iterator<Item = Anchor> + '_ {
        (0..self.len()).map(|i| self.anchor(i))
    }

    pub fn rect(&self, index: usize) -> Rect {
        self.anchor(index).rect(self.patch_size)
    }

    pub fn index_of(&self, anchor: Anchor) -> Option<usize> {
        let r = self.row_starts.iter().position(|&s| s == anchor.row)?;
        let c = self.col_starts.iter().position(|&s| s == anchor.col)?;
        Some(r * self.cols() + c)
    }

    /// Indices of the 8-connected grid neighbours of `index`.
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = ((index / self.cols()) as isize, (index % self.cols()) as isize);
        let (rows, cols) = (self.rows() as isize, self.cols() as isize);
        (-1..=1isize)
            .flat_map(move |dr| (-1..=1isize).map(move |dc| (r + dr, c + dc)))
            .filter(move |&(nr, nc)| (nr, nc) != (r, c) && nr >= 0 && nc >= 0 && nr < rows && nc < cols)
            .map(move |(nr, nc)| (nr * cols + nc) as usize)
    }

    /// Indices of every patch whose rect contains pixel `(x, y)`.
    pub fn patches_containing(&self, x: usize, y: usize) -> Vec<usize> {
        let hits = |starts: &[usize], v: usize| -> Vec<usize> {
            starts
                .iter()
                .enumerate()
                .filter(|(_, &s)| v >= s && v < s + self.patch_size)
                .map(|(i, _)| i)
                .collect()
        };
        let rows = hits(&self.row_starts, y);
        let cols = hits(&self.col_starts, x);
        rows.iter()
            .flat_map(|&r| cols.iter().map(move |&c| r * self.cols() + c))
            .collect()
    }
}

pub fn intensity_range(img: &GrayImage, r: Rect) -> Result<(f64, f64)> {
    r.check_inside(img.width, img.height)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in r.y..r.y + r.h {
        for &v in &img.data[y * img.width + r.x..y * img.width + r.x + r.w] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

/// Common view over gray and color rasters for geometric transforms.
pub trait Raster: Clone {
    const CHANNELS: usize;

    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn sample(&self, x: usize, y: usize, c: usize) -> f64;
    /// Builds a raster from per-channel values; color rasters round to 8 bits.
    fn build(width: usize, height: usize, f: impl FnMut(usize, usize, usize) -> f64) -> Self;
}

impl Raster for GrayImage {
    const CHANNELS: usize = 1;

    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn sample(&self, x: usize, y: usize, _c: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn build(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y, 0).clamp(0.0, 255.0));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }
}

impl Raster for RgbImage {
    const CHANNELS: usize = 3;

    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        f64::from(self.data[(y * self.width + x) * 3 + c])
    }

    fn build(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(quantize(f(x, y, c)));
                }
            }
        }
        RgbImage {
            width,
            height,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

pub fn flip_patch<R: Raster>(img: &R, axis: FlipAxis) -> R {
    let (w, h) = (img.width(), img.height());
    R::build(w, h, |x, y, c| match axis {
        FlipAxis::Horizontal => img.sample(w - 1 - x, y, c),
        FlipAxis::Vertical => img.sample(x, h - 1 - y, c),
    })
}

fn snap(v: f64, eps: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < eps {
        r
    } else {
        v
    }
}

/// Rotates a square raster counter-clockwise (as displayed) about its center.
///
/// Output pixels are bilinearly sampled from the source; samples falling
/// outside are reflected back in. Angles that are multiples of 90° reduce to
/// exact index permutations.
pub fn rotate_patch<R: Raster>(img: &R, angle_deg: f64) -> Result<R> {
    let (w, h) = (img.width(), img.height());
    if w != h {
        return Err(Error::Parameter(format!("rotation needs a square patch, got {w}x{h}")));
    }
    if !angle_deg.is_finite() {
        return Err(Error::Parameter("rotation angle must be finite".into()));
    }
    let theta = angle_deg.to_radians();
    let (cos, sin) = (snap(theta.cos(), 1e-12), snap(theta.sin(), 1e-12));
    let center = (w as f64 - 1.0) / 2.0;

    Ok(R::build(w, h, |x, y, c| {
        let (dx, dy) = (x as f64 - center, y as f64 - center);
        let sx = snap(center + cos * dx - sin * dy, 1e-9);
        let sy = snap(center + sin * dx + cos * dy, 1e-9);
        bilinear_reflect(img, sx, sy, c)
    }))
}

#[inline]
fn bilinear_reflect<R: Raster>(img: &R, sx: f64, sy: f64, c: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let (fx0, fy0) = (sx.floor(), sy.floor());
    let (tx, ty) = (sx - fx0, sy - fy0);
    let (x0, y0) = (fx0 as isize, fy0 as isize);
    let (xa, xb) = (reflect(x0, w), reflect(x0 + 1, w));
    let (ya, yb) = (reflect(y0, h), reflect(y0 + 1, h));
    let top = lerp(img.sample(xa, ya, c), img.sample(xb, ya, c), tx);
    let bottom = lerp(img.sample(xa, yb, c), img.sample(xb, yb, c), tx);
    lerp(top, bottom, ty)
}

/// Interpolation written as `a + t (b - a)` so equal endpoints are returned exactly.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}
