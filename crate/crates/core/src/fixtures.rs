//! Seeded synthetic images with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{BinaryMask, BoundingBox, Image};

/// Background colours for the disk corpus: blues, greens and greys, all far
/// from the red foreground.
const BACKGROUND_PALETTE: [[f64; 3]; 8] = [
    [0.10, 0.20, 0.70],
    [0.15, 0.45, 0.80],
    [0.05, 0.35, 0.25],
    [0.30, 0.60, 0.35],
    [0.45, 0.45, 0.50],
    [0.20, 0.25, 0.30],
    [0.55, 0.70, 0.85],
    [0.10, 0.55, 0.55],
];

/// Occasional warm pixels that sit between the background and the red disk.
const CLUTTER_PALETTE: [[f64; 3]; 3] = [[0.80, 0.50, 0.20], [0.60, 0.20, 0.50], [0.75, 0.35, 0.35]];

/// One disk-on-texture sample.
#[derive(Debug, Clone)]
pub struct DiskSample {
    pub image: Image,
    pub ground_truth: BinaryMask,
    /// Tight box around the ground truth.
    pub bbox: BoundingBox,
}

/// Per-pixel noise: each pixel takes a palette colour with jitter, and a
/// `clutter` fraction of pixels takes one of the warm clutter colours.
pub fn noise_texture(width: usize, height: usize, clutter: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..width * height)
        .map(|_| {
            let base = if rng.gen_bool(clutter) {
                CLUTTER_PALETTE[rng.gen_range(0..CLUTTER_PALETTE.len())]
            } else {
                BACKGROUND_PALETTE[rng.gen_range(0..BACKGROUND_PALETTE.len())]
            };
            [0, 1, 2].map(|c| (base[c] + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0))
        })
        .collect()
}

/// Blocky high-frequency texture: cells of 2 to 5 pixels, each a palette
/// colour with a little per-cell jitter.
pub fn blocky_texture(width: usize, height: usize, palette: &[[f64; 3]], rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; width * height];
    let mut y = 0;
    while y < height {
        let ch = rng.gen_range(2..=5);
        let mut x = 0;
        while x < width {
            let cw = rng.gen_range(2..=5);
            let base = palette[rng.gen_range(0..palette.len())];
            let jitter: [f64; 3] = [rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03)];
            let color = [0, 1, 2].map(|c| (base[c] + jitter[c]).clamp(0.0, 1.0));
            for yy in y..(y + ch).min(height) {
                for xx in x..(x + cw).min(width) {
                    out[yy * width + xx] = color;
                }
            }
            x += cw;
        }
        y += ch;
    }
    out
}

/// Paints small round blobs of random colours, kept well away from red, at
/// random spots.
pub fn scatter_distractors(pixels: &mut [[f64; 3]], width: usize, height: usize, rng: &mut ChaCha8Rng) {
    let count = width * height / 650;
    for _ in 0..count {
        let color = loop {
            let c = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            // reject reddish colours: dominant red channel
            if !(c[0] > 0.5 && c[0] > c[1] + 0.25 && c[0] > c[2] + 0.25) {
                break c;
            }
        };
        let r: f64 = rng.gen_range(2.5..4.5);
        let bx = rng.gen_range(0.0..width as f64);
        let by = rng.gen_range(0.0..height as f64);
        let (x0, x1) = ((bx - r).floor().max(0.0) as usize, ((bx + r).ceil() as usize).min(width));
        let (y0, y1) = ((by - r).floor().max(0.0) as usize, ((by + r).ceil() as usize).min(height));
        for y in y0..y1 {
            for x in x0..x1 {
                if (x as f64 + 0.5 - bx).powi(2) + (y as f64 + 0.5 - by).powi(2) <= r * r {
                    pixels[y * width + x] = color;
                }
            }
        }
    }
}

/// A smooth red disk over a blocky blue/green texture with scattered
/// distractor blobs. The ground truth is
/// the disk's membership at pixel centres; edge pixels are 4x4 supersampled.
pub fn disk_on_texture(size: usize, seed: u64) -> DiskSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = size as f64 * rng.gen_range(0.16..0.22);
    let slack = size as f64 * 0.08;
    let cx = size as f64 / 2.0 + rng.gen_range(-slack..slack);
    let cy = size as f64 / 2.0 + rng.gen_range(-slack..slack);
    let mut texture = blocky_texture(size, size, &BACKGROUND_PALETTE, &mut rng);
    scatter_distractors(&mut texture, size, size, &mut rng);
    let red = [0.85, 0.12, 0.10];
    // gentle shading across the disk, well inside one colour patch
    let shade = |x: f64, y: f64| {
        let t = ((x - cx) + (y - cy)) / (4.0 * radius);
        [0, 1, 2].map(|c| (red[c] * (1.0 - 0.05 * t)).clamp(0.0, 1.0))
    };
    let inside = |x: f64, y: f64| (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius;

    let mut pixels = texture;
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let d = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
            if d > radius + 1.0 {
                continue;
            }
            let coverage = if d < radius - 1.0 {
                1.0
            } else {
                let mut hits = 0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        if inside(x as f64 + (sx as f64 + 0.5) / 4.0, y as f64 + (sy as f64 + 0.5) / 4.0) {
                            hits += 1;
                        }
                    }
                }
                hits as f64 / 16.0
            };
            let fg = shade(px, py);
            let bg = pixels[y * size + x];
            pixels[y * size + x] = [0, 1, 2].map(|c| coverage * fg[c] + (1.0 - coverage) * bg[c]);
        }
    }
    let image = Image::from_pixels(size, size, pixels).expect("valid fixture size");
    let ground_truth = BinaryMask::from_fn(size, size, |x, y| inside(x as f64 + 0.5, y as f64 + 0.5));
    let bbox = ground_truth.foreground_bounds().expect("disk is non-empty");
    DiskSample {
        image,
        ground_truth,
        bbox,
    }
}

/// Dense multi-colour texture with no object, for patch-count trends.
pub fn cluttered_texture(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette: Vec<[f64; 3]> = (0..12)
        .map(|_| [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)])
        .collect();
    let pixels = blocky_texture(size, size, &palette, &mut rng);
    Image::from_pixels(size, size, pixels).expect("valid fixture size")
}

/// Nine colours far apart in Lab; a 3x3 tiling of them never puts equal
/// colours side by side or corner to corner.
const GRID_PALETTE: [[f64; 3]; 10] = [
    [0.90, 0.10, 0.10],
    [0.10, 0.70, 0.10],
    [0.10, 0.20, 0.90],
    [0.95, 0.90, 0.10],
    [0.80, 0.20, 0.80],
    [0.10, 0.80, 0.85],
    [0.95, 0.55, 0.10],
    [0.35, 0.20, 0.10],
    [0.95, 0.95, 0.95],
    [0.05, 0.05, 0.05],
];

/// A `cols` x `rows` grid of `cell`-pixel squares in nine alternating colours.
/// The first `split` cells of the second row are each divided into a left
/// and right half of different colours, adding one patch per split.
pub fn cell_grid(cols: usize, rows: usize, cell: usize, split: usize) -> Image {
    Image::from_fn(cols * cell, rows * cell, |x, y| {
        let (i, j) = (x / cell, y / cell);
        let base = GRID_PALETTE[(i % 3) + 3 * (j % 3)];
        let is_split = j == 1 && i >= 1 && i <= split && x % cell >= cell / 2;
        if is_split {
            GRID_PALETTE[9]
        } else {
            base
        }
    })
    .expect("valid grid size")
}

/// A flat grey field with eight `block`-pixel squares of distinct colours.
/// At size 400 and block 44 the squares keep their own patches down to a
/// reduction by 8 and dissolve into the grey at 10.
pub fn sparse_blocks(size: usize, block: usize) -> Image {
    let step = size / 4;
    let mut origins = Vec::new();
    for gy in 0..4 {
        for gx in 0..4 {
            if (gx + gy) % 2 == 0 {
                origins.push((gx * step + (step - block) / 2, gy * step + (step - block) / 2));
            }
        }
    }
    Image::from_fn(size, size, |x, y| {
        for (n, &(ox, oy)) in origins.iter().enumerate() {
            if x >= ox && x < ox + block && y >= oy && y < oy + block {
                return GRID_PALETTE[n % 9];
            }
        }
        [0.5, 0.5, 0.5]
    })
    .expect("valid block field size")
}
