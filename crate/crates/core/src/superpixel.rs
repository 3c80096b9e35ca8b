//! Mean-shift over-segmentation.
//!
//! Each pixel is a point `(x, y, L, a, b)`. Filtering moves every point to
//! the mean of its flat-kernel neighbourhood (`|dx| <= h_s` spatially and
//! `|dLab| <= h_r` in colour) until the normalised shift drops below
//! `convergence_eps`. Neighbouring pixels whose modes agree within half the
//! bandwidths are joined in scan order, and regions smaller than `min_area`
//! are folded into the adjacent region with the closest mean colour.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_lab, BoundingBox, Image, LabImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    /// Spatial bandwidth `h_s`, pixels.
    pub spatial_bandwidth: f64,
    /// Range bandwidth `h_r`, Lab units.
    pub range_bandwidth: f64,
    pub min_area: usize,
    pub max_iters: usize,
    pub convergence_eps: f64,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self {
            spatial_bandwidth: 8.0,
            range_bandwidth: 8.0,
            min_area: 20,
            max_iters: 50,
            convergence_eps: 0.05,
        }
    }
}

impl MeanShiftConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.spatial_bandwidth > 0.0
            && self.range_bandwidth > 0.0
            && self.min_area > 0
            && self.max_iters > 0
            && self.convergence_eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("mean-shift parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchStats {
    pub id: usize,
    pub area: usize,
    pub mean_lab: [f64; 3],
    /// Mean pixel position `(x, y)`.
    pub centroid: [f64; 2],
    /// Fraction of the patch inside the bounding box; zero until
    /// [`PatchMap::set_bounding_box`] is called.
    pub bbox_overlap: f64,
}

/// Super-pixel decomposition: a dense patch id per pixel plus statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    patches: Vec<PatchStats>,
}

const NEIGHBORS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl PatchMap {
    /// Builds a map from arbitrary per-pixel labels and the colours they
    /// annotate. Labels are compacted to `0..count` in scan order of first
    /// appearance; connectivity is not enforced.
    pub fn from_labels(lab: &LabImage, raw: &[u32]) -> Result<Self> {
        if raw.len() != lab.width * lab.height {
            return Err(Error::DimensionMismatch(raw.len(), 1, lab.width * lab.height, 1));
        }
        let mut remap = std::collections::HashMap::new();
        let labels: Vec<u32> = raw
            .iter()
            .map(|&l| {
                let next = remap.len() as u32;
                *remap.entry(l).or_insert(next)
            })
            .collect();
        let count = remap.len();
        let mut area = vec![0usize; count];
        let mut lab_sum = vec![[0.0f64; 3]; count];
        let mut pos_sum = vec![[0.0f64; 2]; count];
        for (i, &l) in labels.iter().enumerate() {
            let l = l as usize;
            area[l] += 1;
            let c = lab.pixels[i];
            for ch in 0..3 {
                lab_sum[l][ch] += c[ch];
            }
            pos_sum[l][0] += (i % lab.width) as f64;
            pos_sum[l][1] += (i / lab.width) as f64;
        }
        let patches = (0..count)
            .map(|id| {
                let n = area[id] as f64;
                PatchStats {
                    id,
                    area: area[id],
                    mean_lab: lab_sum[id].map(|s| s / n),
                    centroid: pos_sum[id].map(|s| s / n),
                    bbox_overlap: 0.0,
                }
            })
            .collect();
        Ok(Self {
            width: lab.width,
            height: lab.height,
            labels,
            patches,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn patches(&self) -> &[PatchStats] {
        &self.patches
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    /// Fraction of each patch's pixels that fall inside `bbox`.
    pub fn bbox_overlaps(&self, bbox: &BoundingBox) -> Vec<f64> {
        let mut inside = vec![0usize; self.patches.len()];
        for y in bbox.y..(bbox.y + bbox.h).min(self.height) {
            for x in bbox.x..(bbox.x + bbox.w).min(self.width) {
                inside[self.label(x, y)] += 1;
            }
        }
        inside
            .iter()
            .zip(&self.patches)
            .map(|(&n, p)| n as f64 / p.area as f64)
            .collect()
    }

    pub fn set_bounding_box(&mut self, bbox: &BoundingBox) {
        let overlaps = self.bbox_overlaps(bbox);
        for (p, o) in self.patches.iter_mut().zip(overlaps) {
            p.bbox_overlap = o;
        }
    }

    /// Sorted 8-connected neighbour lists per patch.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.patches.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let a = self.label(x, y);
                // forward half of the 8-neighbourhood covers every pair once
                for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                        continue;
                    }
                    let b = self.label(nx as usize, ny as usize);
                    if a != b {
                        adj[a].insert(b);
                        adj[b].insert(a);
                    }
                }
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Per-patch flag: does any pixel lie on the image border?
    pub fn touches_border(&self) -> Vec<bool> {
        let mut out = vec![false; self.patches.len()];
        for x in 0..self.width {
            out[self.label(x, 0)] = true;
            out[self.label(x, self.height - 1)] = true;
        }
        for y in 0..self.height {
            out[self.label(0, y)] = true;
            out[self.label(self.width - 1, y)] = true;
        }
        out
    }

    /// Debug rendering: one seeded random colour per patch.
    pub fn debug_image(&self, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let palette: Vec<[f64; 3]> = (0..self.patches.len())
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let pixels = self.labels.iter().map(|&l| palette[l as usize]).collect();
        Image::from_pixels(self.width, self.height, pixels).expect("patch map dimensions are valid")
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // smaller root wins, so results do not depend on union order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// A converged mean-shift point: position and colour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub x: f64,
    pub y: f64,
    pub lab: [f64; 3],
}

fn shift_to_mode(lab: &LabImage, px: usize, py: usize, cfg: &MeanShiftConfig) -> Mode {
    let hs = cfg.spatial_bandwidth;
    let hr2 = cfg.range_bandwidth * cfg.range_bandwidth;
    let hs2 = hs * hs;
    let reach = hs.floor() as isize;
    let (w, h) = (lab.width as isize, lab.height as isize);

    let mut cx = px as f64;
    let mut cy = py as f64;
    let mut cl = lab.get(px, py);
    for _ in 0..cfg.max_iters {
        let ix = cx.round() as isize;
        let iy = cy.round() as isize;
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut sl = [0.0; 3];
        for qy in (iy - reach).max(0)..=(iy + reach).min(h - 1) {
            let dy = qy as f64 - cy;
            for qx in (ix - reach).max(0)..=(ix + reach).min(w - 1) {
                let dx = qx as f64 - cx;
                if dx * dx + dy * dy > hs2 {
                    continue;
                }
                let q = lab.pixels[(qy * w + qx) as usize];
                let d2 = (q[0] - cl[0]).powi(2) + (q[1] - cl[1]).powi(2) + (q[2] - cl[2]).powi(2);
                if d2 > hr2 {
                    continue;
                }
                n += 1;
                sx += qx as f64;
                sy += qy as f64;
                for c in 0..3 {
                    sl[c] += q[c];
                }
            }
        }
        if n == 0 {
            break;
        }
        let inv = 1.0 / n as f64;
        let nx = sx * inv;
        let ny = sy * inv;
        let nl = sl.map(|s| s * inv);
        let shift2 = ((nx - cx).powi(2) + (ny - cy).powi(2)) / hs2
            + ((nl[0] - cl[0]).powi(2) + (nl[1] - cl[1]).powi(2) + (nl[2] - cl[2]).powi(2)) / hr2;
        cx = nx;
        cy = ny;
        cl = nl;
        if shift2.sqrt() < cfg.convergence_eps {
            break;
        }
    }
    Mode { x: cx, y: cy, lab: cl }
}

/// Runs the filtering phase only, returning one mode per pixel in scan order.
pub fn mean_shift_modes(lab: &LabImage, cfg: &MeanShiftConfig) -> Vec<Mode> {
    (0..lab.width * lab.height)
        .into_par_iter()
        .map(|i| shift_to_mode(lab, i % lab.width, i / lab.width, cfg))
        .collect()
}

fn cluster_modes(lab: &LabImage, modes: &[Mode], cfg: &MeanShiftConfig) -> Vec<u32> {
    let (w, h) = (lab.width, lab.height);
    let hs = cfg.spatial_bandwidth / 2.0;
    let hr = cfg.range_bandwidth / 2.0;
    let close = |a: &Mode, b: &Mode| {
        let ds = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
        let dr = (a.lab[0] - b.lab[0]).powi(2) + (a.lab[1] - b.lab[1]).powi(2) + (a.lab[2] - b.lab[2]).powi(2);
        ds <= hs * hs && dr <= hr * hr
    };
    let mut uf = UnionFind::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            // previously scanned half of the 8-neighbourhood
            for (dx, dy) in [(-1isize, 0isize), (-1, -1), (0, -1), (1, -1)] {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if close(&modes[i], &modes[j]) {
                    uf.union(i as u32, j as u32);
                }
            }
        }
    }
    (0..(w * h) as u32).map(|i| uf.find(i)).collect()
}

// Folds regions below `min_area` into the adjacent region with the nearest
// mean colour, smallest region first.
fn merge_small_regions(lab: &LabImage, labels: &[u32], min_area: usize) -> Vec<u32> {
    let base = PatchMap::from_labels(lab, labels).expect("labels match image");
    let n = base.patch_count();
    let adjacency = base.adjacency();
    let mut adj: Vec<BTreeSet<usize>> = adjacency.into_iter().map(|v| v.into_iter().collect()).collect();
    let mut area: Vec<usize> = base.patches.iter().map(|p| p.area).collect();
    let mut lab_sum: Vec<[f64; 3]> = base
        .patches
        .iter()
        .map(|p| p.mean_lab.map(|m| m * p.area as f64))
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).filter(|&r| area[r] < min_area).map(|r| Reverse((area[r], r))).collect();
    while let Some(Reverse((a, r))) = heap.pop() {
        if !alive[r] || area[r] != a || a >= min_area {
            continue;
        }
        let mean_r = lab_sum[r].map(|s| s / area[r] as f64);
        let target = adj[r]
            .iter()
            .map(|&m| {
                let mean_m = lab_sum[m].map(|s| s / area[m] as f64);
                let d = (0..3).map(|c| (mean_m[c] - mean_r[c]).powi(2)).sum::<f64>();
                (d, m)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, m)| m);
        let Some(t) = target else { continue };

        alive[r] = false;
        parent[r] = t;
        area[t] += area[r];
        for c in 0..3 {
            lab_sum[t][c] += lab_sum[r][c];
        }
        let neighbors = std::mem::take(&mut adj[r]);
        for m in neighbors {
            adj[m].remove(&r);
            if m != t {
                adj[m].insert(t);
                adj[t].insert(m);
            }
        }
        if area[t] < min_area {
            heap.push(Reverse((area[t], t)));
        }
    }

    let resolve = |mut r: usize| {
        while parent[r] != r {
            r = parent[r];
        }
        r as u32
    };
    let root_of: Vec<u32> = (0..n).map(resolve).collect();
    base.labels.iter().map(|&l| root_of[l as usize]).collect()
}

/// Mean-shift segmentation of `img` into 8-connected patches.
pub fn segment(img: &Image, cfg: &MeanShiftConfig) -> Result<PatchMap> {
    cfg.validate()?;
    img.require_min(4, 4)?;
    let lab = rgb_to_lab(img);
    let modes = mean_shift_modes(&lab, cfg);
    let clustered = cluster_modes(&lab, &modes, cfg);
    let merged = merge_small_regions(&lab, &clustered, cfg.min_area);
    PatchMap::from_labels(&lab, &merged)
}

/// Number of distinct patches with at least one pixel inside `bbox`.
pub fn count_patches_in_roi(pm: &PatchMap, bbox: &BoundingBox) -> usize {
    let mut seen = vec![false; pm.patch_count()];
    for y in bbox.y..(bbox.y + bbox.h).min(pm.height) {
        for x in bbox.x..(bbox.x + bbox.w).min(pm.width) {
            seen[pm.label(x, y)] = true;
        }
    }
    seen.iter().filter(|&&s| s).count()
}

/// Flood-fills 8-connected components of equal label; returns a component
/// id per pixel. Used to check patch connectivity.
pub fn connected_components(width: usize, height: usize, labels: &[u32]) -> Vec<u32> {
    let mut comp = vec![u32::MAX; labels.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if comp[j] == u32::MAX && labels[j] == labels[i] {
                    comp[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    comp
}
