//! Full-resolution trimap from a reduced-resolution segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{boundary_band_flags, upsample_mask, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrimapLabel {
    Background,
    Foreground,
    Unknown,
}

impl TrimapLabel {
    /// Gray level used in trimap PNGs.
    pub fn gray(self) -> u8 {
        match self {
            TrimapLabel::Background => 0,
            TrimapLabel::Unknown => 128,
            TrimapLabel::Foreground => 255,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimapConfig {
    /// Band radius as a multiple of the downsample factor.
    pub band_scale: f64,
}

impl Default for TrimapConfig {
    fn default() -> Self {
        Self { band_scale: 1.0 }
    }
}

impl TrimapConfig {
    pub fn radius(&self, factor: usize) -> usize {
        ((self.band_scale * factor as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<TrimapLabel>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(labels.len(), 1, width * height, 1));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TrimapLabel {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, label: TrimapLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn to_gray(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.gray()).collect()
    }

    /// Parses a gray trimap: 0 background, 255 foreground, anything else unknown.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        let labels = gray
            .iter()
            .map(|&g| match g {
                0 => TrimapLabel::Background,
                255 => TrimapLabel::Foreground,
                _ => TrimapLabel::Unknown,
            })
            .collect();
        Self::new(width, height, labels)
    }
}

/// Upsamples `mask` to `orig_w x orig_h` and marks every pixel within
/// Chebyshev distance `radius` of the label boundary as unknown.
pub fn build_trimap_with_radius(mask: &BinaryMask, orig_w: usize, orig_h: usize, factor: usize, radius: usize) -> Result<Trimap> {
    if factor == 0 || radius == 0 {
        return Err(Error::InvalidConfig("factor and band radius must be >= 1".into()));
    }
    // the reduced mask must come from ceil(orig / factor)
    let covers = |m: usize, o: usize| m * factor >= o && (m - 1) * factor < o;
    if mask.width() == 0 || mask.height() == 0 || !covers(mask.width(), orig_w) || !covers(mask.height(), orig_h) {
        return Err(Error::InvalidTarget {
            source_w: mask.width(),
            source_h: mask.height(),
            target_w: orig_w,
            target_h: orig_h,
        });
    }
    let up = upsample_mask(mask, orig_w, orig_h)?;
    let band = boundary_band_flags(&up, radius);
    let labels = up
        .labels()
        .iter()
        .zip(&band)
        .map(|(&fg, &unknown)| match (unknown, fg) {
            (true, _) => TrimapLabel::Unknown,
            (false, true) => TrimapLabel::Foreground,
            (false, false) => TrimapLabel::Background,
        })
        .collect();
    Trimap::new(orig_w, orig_h, labels)
}

/// Trimap with the default band radius `r = factor`.
pub fn build_trimap(mask: &BinaryMask, orig_w: usize, orig_h: usize, factor: usize) -> Result<Trimap> {
    build_trimap_with_radius(mask, orig_w, orig_h, factor, factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_foreground_has_no_unknown() {
        let t = build_trimap(&BinaryMask::filled(10, 10, true), 40, 40, 4).unwrap();
        assert_eq!((t.width(), t.height()), (40, 40));
        assert_eq!(t.count(TrimapLabel::Unknown), 0);
        assert_eq!(t.count(TrimapLabel::Foreground), 1600);
    }

    #[test]
    fn identity_split() {
        let m = BinaryMask::from_fn(4, 4, |x, _| x < 2);
        let t = build_trimap(&m, 4, 4, 1).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let expect = match x {
                    0 => TrimapLabel::Foreground,
                    3 => TrimapLabel::Background,
                    _ => TrimapLabel::Unknown,
                };
                assert_eq!(t.get(x, y), expect);
            }
        }
    }

    #[test]
    fn scaled_split_band_count() {
        let m = BinaryMask::from_fn(10, 10, |x, _| x < 5);
        let t = build_trimap(&m, 40, 40, 4).unwrap();
        assert_eq!(t.count(TrimapLabel::Unknown), 320);
        // columns 16..24 are unknown
        for x in 0..40 {
            let unknown = (16..24).contains(&x);
            assert_eq!(t.get(x, 7) == TrimapLabel::Unknown, unknown, "column {x}");
        }
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let m = BinaryMask::filled(10, 10, false);
        assert!(matches!(build_trimap(&m, 50, 40, 4), Err(Error::InvalidTarget { .. })));
        // ceil(37 / 4) = 10 is accepted
        assert!(build_trimap(&m, 37, 40, 4).is_ok());
    }

    #[test]
    fn gray_round_trip() {
        let m = BinaryMask::from_fn(6, 6, |x, y| x + y < 6);
        let t = build_trimap(&m, 6, 6, 1).unwrap();
        let g = t.to_gray();
        assert!(g.iter().all(|v| [0, 128, 255].contains(v)));
        assert_eq!(Trimap::from_gray(6, 6, &g).unwrap(), t);
    }
}
