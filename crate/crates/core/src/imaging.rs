//! Raster types, colour conversion, resampling and boundary bands.
//!
//! Colour channels are kept as `f64` in `[0, 1]`. 8-bit files are divided by
//! 255 on load (see [`crate::io`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 3-channel colour raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Image {
    /// Builds an image from row-major pixels. Channel values are clamped to `[0, 1]`.
    pub fn from_pixels(width: usize, height: usize, mut pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ImageTooSmall {
                width,
                height,
                min_width: 1,
                min_height: 1,
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "pixel buffer has {} entries, expected {}",
                pixels.len(),
                width * height
            )));
        }
        for p in &mut pixels {
            for c in p.iter_mut() {
                *c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::from_pixels(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Result<Self> {
        Self::from_pixels(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub(crate) fn require_min(&self, min_width: usize, min_height: usize) -> Result<()> {
        if self.width < min_width || self.height < min_height {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                min_width,
                min_height,
            });
        }
        Ok(())
    }
}

/// Per-pixel foreground/background labels; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "mask buffer has {} entries, expected {}",
                labels.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, foreground: bool) -> Self {
        Self {
            width,
            height,
            labels: vec![foreground; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, foreground: bool) {
        self.labels[y * self.width + x] = foreground;
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|l| !l).collect(),
        }
    }

    /// Tight box around the foreground pixels, or `None` for an empty mask.
    pub fn foreground_bounds(&self) -> Option<BoundingBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

/// User rectangle assumed to contain the object, with background around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    /// Checks the box is non-empty, inside the image, and leaves at least one
    /// pixel of margin on every side.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidBoundingBox(format!("empty box {self}")));
        }
        if self.x < 1 || self.y < 1 || self.x + self.w + 1 > width || self.y + self.h + 1 > height {
            return Err(Error::InvalidBoundingBox(format!(
                "box {self} must leave a 1-pixel margin inside a {width}x{height} image"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Maps the box onto an image reduced by `factor`, rounding each edge to
    /// the nearest pixel and clamping to keep the 1-pixel margin.
    pub fn scaled_down(&self, factor: usize, width: usize, height: usize) -> Result<Self> {
        let k = factor as f64;
        let scale_axis = |start: usize, len: usize, extent: usize| -> Option<(usize, usize)> {
            if extent < 3 {
                return None;
            }
            let lo = ((start as f64 / k).round() as usize).max(1);
            let hi = (((start + len) as f64 / k).round() as usize).min(extent - 1);
            if hi > lo {
                Some((lo, hi - lo))
            } else {
                // collapsed: keep a single pixel, clamped into the margin
                let lo = lo.min(extent - 2);
                Some((lo, 1))
            }
        };
        match (scale_axis(self.x, self.w, width), scale_axis(self.y, self.h, height)) {
            (Some((x, w)), Some((y, h))) => Ok(Self::new(x, y, w, h)),
            _ => Err(Error::InvalidBoundingBox(format!(
                "box {self} cannot keep a margin in a {width}x{height} image"
            ))),
        }
    }

    /// Grows the box about its centre by `factor`, clamped to keep the margin.
    pub fn dilated(&self, factor: f64, width: usize, height: usize) -> Self {
        let cx = self.x as f64 + self.w as f64 / 2.0;
        let cy = self.y as f64 + self.h as f64 / 2.0;
        let hw = self.w as f64 * factor / 2.0;
        let hh = self.h as f64 * factor / 2.0;
        let x0 = ((cx - hw).round().max(1.0)) as usize;
        let y0 = ((cy - hh).round().max(1.0)) as usize;
        let x1 = ((cx + hw).round() as usize).min(width.saturating_sub(1));
        let y1 = ((cy + hh).round() as usize).min(height.saturating_sub(1));
        Self::new(x0, y0, x1.saturating_sub(x0).max(1), y1.saturating_sub(y0).max(1))
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl std::str::FromStr for BoundingBox {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<_> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected X,Y,W,H, got {s:?}"));
        }
        let mut v = [0usize; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|e| format!("bad box component {part:?}: {e}"))?;
        }
        Ok(Self::new(v[0], v[1], v[2], v[3]))
    }
}

/// Raster of CIE-Lab triples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl LabImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }
}

// D65 reference white
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Converts one sRGB colour (channels in `[0, 1]`) to CIE-Lab under D65.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let xyz = [
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    ];
    let f = |t: f64| {
        if t > LAB_EPSILON {
            t.cbrt()
        } else {
            (LAB_KAPPA * t + 16.0) / 116.0
        }
    };
    let fx = f(xyz[0] / WHITE[0]);
    let fy = f(xyz[1] / WHITE[1]);
    let fz = f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`srgb_to_lab`]; out-of-gamut results are not clamped.
pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let finv = |f: f64| {
        let t = f * f * f;
        if t > LAB_EPSILON {
            t
        } else {
            (116.0 * f - 16.0) / LAB_KAPPA
        }
    };
    let x = finv(fx) * WHITE[0];
    let y = finv(fy) * WHITE[1];
    let z = finv(fz) * WHITE[2];
    // exact inverse of the forward matrix, so round trips close to 1e-12
    let r = 3.2404548360214087 * x - 1.5371388501025751 * y - 0.498531546868481 * z;
    let g = -0.9692663898756538 * x + 1.876010928842491 * y + 0.041556082346673545 * z;
    let b = 0.05564341960421367 * x - 0.20402585426769818 * y + 1.057225162457929 * z;
    [r, g, b].map(linear_to_srgb)
}

pub fn rgb_to_lab(img: &Image) -> LabImage {
    LabImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| srgb_to_lab(p)).collect(),
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut tmp = vec![[0.0; 3]; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (i, kv) in kernel.iter().enumerate() {
                let sx = (x + i as isize - r).clamp(0, w - 1);
                let p = img.pixels[(y * w + sx) as usize];
                for c in 0..3 {
                    acc[c] += kv * p[c];
                }
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![[0.0; 3]; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (i, kv) in kernel.iter().enumerate() {
                let sy = (y + i as isize - r).clamp(0, h - 1);
                let p = tmp[(sy * w + x) as usize];
                for c in 0..3 {
                    acc[c] += kv * p[c];
                }
            }
            out[(y * w + x) as usize] = acc.map(|v| v.clamp(0.0, 1.0));
        }
    }
    Image {
        width: img.width,
        height: img.height,
        pixels: out,
    }
}

fn bilinear(img: &Image, fx: f64, fy: f64) -> [f64; 3] {
    let fx = fx.clamp(0.0, (img.width - 1) as f64);
    let fy = fy.clamp(0.0, (img.height - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] + (p10[c] - p00[c]) * tx;
        let bottom = p01[c] + (p11[c] - p01[c]) * tx;
        out[c] = (top + (bottom - top) * ty).clamp(0.0, 1.0);
    }
    out
}

/// Reduces the image by an integer factor: Gaussian prefilter with
/// `sigma = k / 2`, then bilinear sampling at stride `k`.
///
/// The output is `ceil(w / k) x ceil(h / k)`; `k = 1` returns a copy.
pub fn downsample(img: &Image, k: usize) -> Result<Image> {
    if k == 0 {
        return Err(Error::InvalidConfig("downsample factor must be >= 1".into()));
    }
    if k == 1 {
        return Ok(img.clone());
    }
    let ow = img.width.div_ceil(k);
    let oh = img.height.div_ceil(k);
    if ow < 2 || oh < 2 {
        return Err(Error::ImageTooSmall {
            width: ow,
            height: oh,
            min_width: 2,
            min_height: 2,
        });
    }
    let blurred = gaussian_blur(img, k as f64 / 2.0);
    let kf = k as f64;
    let mut pixels = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let sx = (x as f64 + 0.5) * kf - 0.5;
            let sy = (y as f64 + 0.5) * kf - 0.5;
            pixels.push(bilinear(&blurred, sx, sy));
        }
    }
    Ok(Image {
        width: ow,
        height: oh,
        pixels,
    })
}

/// Nearest-neighbour label expansion to a larger (or equal) size.
pub fn upsample_mask(mask: &BinaryMask, target_w: usize, target_h: usize) -> Result<BinaryMask> {
    if target_w < mask.width || target_h < mask.height {
        return Err(Error::InvalidTarget {
            source_w: mask.width,
            source_h: mask.height,
            target_w,
            target_h,
        });
    }
    let sx: Vec<usize> = (0..target_w)
        .map(|x| (((x as f64 + 0.5) * mask.width as f64 / target_w as f64) as usize).min(mask.width - 1))
        .collect();
    let sy: Vec<usize> = (0..target_h)
        .map(|y| (((y as f64 + 0.5) * mask.height as f64 / target_h as f64) as usize).min(mask.height - 1))
        .collect();
    Ok(BinaryMask::from_fn(target_w, target_h, |x, y| mask.get(sx[x], sy[y])))
}

// Square (Chebyshev) dilation of a boolean raster by radius `r`, separable.
fn dilate_square(src: &[bool], width: usize, height: usize, r: usize) -> Vec<bool> {
    let mut rows = vec![false; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        // distance to the nearest set pixel along the row, both directions
        let mut last: Option<usize> = None;
        for x in 0..width {
            if row[x] {
                last = Some(x);
            }
            if matches!(last, Some(l) if x - l <= r) {
                rows[y * width + x] = true;
            }
        }
        let mut next: Option<usize> = None;
        for x in (0..width).rev() {
            if row[x] {
                next = Some(x);
            }
            if matches!(next, Some(n) if n - x <= r) {
                rows[y * width + x] = true;
            }
        }
    }
    let mut out = vec![false; src.len()];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if rows[y * width + x] {
                last = Some(y);
            }
            if matches!(last, Some(l) if y - l <= r) {
                out[y * width + x] = true;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..height).rev() {
            if rows[y * width + x] {
                next = Some(y);
            }
            if matches!(next, Some(n) if n - y <= r) {
                out[y * width + x] = true;
            }
        }
    }
    out
}

/// Per-pixel flags: `true` where the Chebyshev distance to the nearest pixel
/// of the opposite label is at most `r`.
pub fn boundary_band_flags(mask: &BinaryMask, r: usize) -> Vec<bool> {
    let near_fg = dilate_square(&mask.labels, mask.width, mask.height, r);
    let background: Vec<bool> = mask.labels.iter().map(|l| !l).collect();
    let near_bg = dilate_square(&background, mask.width, mask.height, r);
    mask.labels
        .iter()
        .zip(near_fg.iter().zip(&near_bg))
        .map(|(&fg, (&nf, &nb))| if fg { nb } else { nf })
        .collect()
}

/// Pixels within Chebyshev distance `r` of the opposite label, in scan order.
pub fn band_around_boundary(mask: &BinaryMask, r: usize) -> Result<Vec<(usize, usize)>> {
    if r == 0 {
        return Err(Error::InvalidConfig("band radius must be >= 1".into()));
    }
    let flags = boundary_band_flags(mask, r);
    Ok(flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| (i % mask.width, i / mask.width))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_mask(w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, _| x < w / 2)
    }

    #[test]
    fn downsample_dimensions() {
        let img = Image::filled(100, 100, [0.2, 0.4, 0.6]).unwrap();
        let d = downsample(&img, 2).unwrap();
        assert_eq!((d.width(), d.height()), (50, 50));
        let odd = Image::filled(101, 37, [0.0; 3]).unwrap();
        let d = downsample(&odd, 10).unwrap();
        assert_eq!((d.width(), d.height()), (11, 4));
    }

    #[test]
    fn downsample_identity_and_constant() {
        let img = Image::from_fn(9, 7, |x, y| [x as f64 / 9.0, y as f64 / 7.0, 0.5]).unwrap();
        assert_eq!(downsample(&img, 1).unwrap(), img);

        let c = [0.3, 0.7, 0.1];
        let img = Image::filled(80, 80, c).unwrap();
        let d = downsample(&img, 4).unwrap();
        assert_eq!((d.width(), d.height()), (20, 20));
        for p in d.pixels() {
            for ch in 0..3 {
                assert!((p[ch] - c[ch]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn downsample_too_small() {
        let img = Image::filled(10, 40, [0.0; 3]).unwrap();
        assert!(matches!(downsample(&img, 10), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn downsample_composes_in_dimensions() {
        for (w, h) in [(37, 53), (100, 64), (9, 13)] {
            let img = Image::filled(w, h, [0.5; 3]).unwrap();
            let a = downsample(&downsample(&img, 2).unwrap(), 2).unwrap();
            let b = downsample(&img, 4).unwrap();
            assert_eq!((a.width(), a.height()), (b.width(), b.height()));
        }
    }

    #[test]
    fn upsample_blocks() {
        let m = BinaryMask::new(2, 2, vec![true, false, false, false]).unwrap();
        let u = upsample_mask(&m, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(u.get(x, y), x < 2 && y < 2);
            }
        }
        let full = BinaryMask::filled(3, 5, true);
        assert_eq!(upsample_mask(&full, 17, 9).unwrap().foreground_count(), 17 * 9);
        let m = split_mask(10, 10);
        assert_eq!(upsample_mask(&m, 10, 10).unwrap(), m);
        assert!(matches!(upsample_mask(&m, 9, 10), Err(Error::InvalidTarget { .. })));
    }

    #[test]
    fn lab_reference_points() {
        assert_eq!(srgb_to_lab([0.0; 3]), [0.0, 0.0, 0.0]);
        let white = srgb_to_lab([1.0; 3]);
        assert!((white[0] - 100.0).abs() < 1e-3);
        assert!(white[1].abs() < 0.01 && white[2].abs() < 0.01);
    }

    #[test]
    fn band_examples() {
        let uniform = BinaryMask::filled(6, 6, true);
        assert!(band_around_boundary(&uniform, 3).unwrap().is_empty());

        let m = split_mask(4, 4);
        let band = band_around_boundary(&m, 1).unwrap();
        assert_eq!(band.len(), 8);
        assert!(band.iter().all(|&(x, _)| x == 1 || x == 2));
        assert_eq!(band_around_boundary(&m, 2).unwrap().len(), 16);
    }

    #[test]
    fn bbox_validation_and_scaling() {
        let b = BoundingBox::new(1, 1, 8, 8);
        assert!(b.validate(10, 10).is_ok());
        assert!(BoundingBox::new(0, 1, 8, 8).validate(10, 10).is_err());
        assert!(BoundingBox::new(1, 1, 9, 8).validate(10, 10).is_err());
        assert!(BoundingBox::new(1, 1, 0, 8).validate(10, 10).is_err());

        let big = BoundingBox::new(40, 60, 100, 80);
        let s = big.scaled_down(4, 50, 50).unwrap();
        assert_eq!(s, BoundingBox::new(10, 15, 25, 20));
        s.validate(50, 50).unwrap();

        // an edge-hugging box is pulled back inside the margin
        let wide = BoundingBox::new(1, 1, 198, 198);
        let s = wide.scaled_down(10, 20, 20).unwrap();
        s.validate(20, 20).unwrap();
    }

    #[test]
    fn bbox_parse() {
        assert_eq!("3, 4,5,6".parse::<BoundingBox>().unwrap(), BoundingBox::new(3, 4, 5, 6));
        assert!("3,4,5".parse::<BoundingBox>().is_err());
        assert!("a,4,5,6".parse::<BoundingBox>().is_err());
    }
}
