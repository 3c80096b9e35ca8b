//! Patch-level figure-ground classification and the maxmin-cut score.
//!
//! Classification is a deterministic five-step procedure:
//!
//! 1. patches with less than `seed_outside_fraction` of their pixels inside
//!    the box seed the background;
//! 2. every other patch gets `d_bg`, its smallest mean-Lab distance to a seed;
//! 3. a two-cluster 1-D k-means on `d_bg` (centres initialised at the min and
//!    max) splits them, and the far cluster becomes foreground;
//! 4. foreground components (patch adjacency) touching the image border are
//!    dropped;
//! 5. foreground components smaller than `fragment_area_fraction` of the
//!    largest one are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, BoundingBox};
use crate::superpixel::PatchMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgConfig {
    /// Patches with box overlap below this fraction seed the background.
    pub seed_outside_fraction: f64,
    pub min_patches: usize,
    pub fragment_area_fraction: f64,
}

impl Default for FgConfig {
    fn default() -> Self {
        Self {
            seed_outside_fraction: 0.5,
            min_patches: 8,
            fragment_area_fraction: 0.05,
        }
    }
}

impl FgConfig {
    pub fn validate(&self) -> Result<()> {
        let rho = self.seed_outside_fraction;
        let frag = self.fragment_area_fraction;
        if !(rho > 0.0 && rho <= 1.0) || !(frag > 0.0 && frag < 1.0) {
            return Err(Error::InvalidConfig(format!("figure-ground parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Foreground/background label per patch plus the pixel mask it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct FgLabeling {
    labels: Vec<bool>,
    mask: BinaryMask,
}

impl FgLabeling {
    pub fn from_patch_labels(pm: &PatchMap, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != pm.patch_count() {
            return Err(Error::DimensionMismatch(labels.len(), 1, pm.patch_count(), 1));
        }
        let mask = BinaryMask::new(
            pm.width(),
            pm.height(),
            pm.labels().iter().map(|&l| labels[l as usize]).collect(),
        )?;
        Ok(Self { labels, mask })
    }

    /// `true` marks a foreground patch.
    pub fn patch_labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn into_mask(self) -> BinaryMask {
        self.mask
    }
}

fn lab_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Two-cluster k-means on scalars; returns `true` for members of the high
/// cluster. `None` when all values coincide.
fn split_two_means(values: &[f64]) -> Option<Vec<bool>> {
    let lo0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi0 = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi0 - lo0 > 1e-12 * hi0.abs().max(1.0)) {
        return None;
    }
    let (mut lo, mut hi) = (lo0, hi0);
    let mut assign: Vec<bool> = Vec::new();
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let next: Vec<bool> = values.iter().map(|&v| v >= mid).collect();
        if next == assign {
            break;
        }
        assign = next;
        let mean = |high: bool| {
            let (s, n) = values
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == high)
                .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
            s / n as f64
        };
        // the extreme values always stay in their own cluster, so neither is empty
        lo = mean(false);
        hi = mean(true);
    }
    Some(assign)
}

// Connected components of foreground patches under patch adjacency.
fn foreground_components(adj: &[Vec<usize>], fg: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; fg.len()];
    let mut comps = Vec::new();
    for start in 0..fg.len() {
        if !fg[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut i = 0;
        while i < comp.len() {
            let p = comp[i];
            for &q in &adj[p] {
                if fg[q] && !seen[q] {
                    seen[q] = true;
                    comp.push(q);
                }
            }
            i += 1;
        }
        comps.push(comp);
    }
    comps
}

/// Background seeds from the box prior: overlap below `rho`.
pub fn box_seeds(pm: &PatchMap, bbox: &BoundingBox, rho: f64) -> Vec<bool> {
    pm.bbox_overlaps(bbox).into_iter().map(|o| o < rho).collect()
}

/// Classification steps 2 through 5 given an explicit background seed set.
pub fn classify_with_seeds(pm: &PatchMap, seeds: &[bool], cfg: &FgConfig) -> Result<FgLabeling> {
    cfg.validate()?;
    let patches = pm.patches();
    if seeds.len() != patches.len() {
        return Err(Error::DimensionMismatch(seeds.len(), 1, patches.len(), 1));
    }
    let seed_ids: Vec<usize> = (0..patches.len()).filter(|&i| seeds[i]).collect();
    if seed_ids.is_empty() {
        return Err(Error::InvalidBoundingBox("no background seed patches".into()));
    }
    let candidates: Vec<usize> = (0..patches.len()).filter(|&i| !seeds[i]).collect();
    let mut fg = vec![false; patches.len()];
    if candidates.is_empty() {
        return FgLabeling::from_patch_labels(pm, fg);
    }

    let d_bg: Vec<f64> = candidates
        .iter()
        .map(|&p| {
            seed_ids
                .iter()
                .map(|&s| lab_distance(&patches[p].mean_lab, &patches[s].mean_lab))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    match split_two_means(&d_bg) {
        Some(high) => {
            for (&p, &h) in candidates.iter().zip(&high) {
                fg[p] = h;
            }
        }
        // no colour evidence: the box prior alone decides
        None => candidates.iter().for_each(|&p| fg[p] = true),
    }

    let adj = pm.adjacency();
    let border = pm.touches_border();
    for comp in foreground_components(&adj, &fg) {
        if comp.iter().any(|&p| border[p]) {
            comp.iter().for_each(|&p| fg[p] = false);
        }
    }

    let comps = foreground_components(&adj, &fg);
    let areas: Vec<usize> = comps
        .iter()
        .map(|c| c.iter().map(|&p| patches[p].area).sum())
        .collect();
    if let Some(&largest) = areas.iter().max() {
        let cutoff = cfg.fragment_area_fraction * largest as f64;
        for (comp, &area) in comps.iter().zip(&areas) {
            if (area as f64) < cutoff {
                comp.iter().for_each(|&p| fg[p] = false);
            }
        }
    }
    FgLabeling::from_patch_labels(pm, fg)
}

/// Labels every patch foreground or background using the box prior.
pub fn classify(pm: &PatchMap, bbox: &BoundingBox, cfg: &FgConfig) -> Result<FgLabeling> {
    cfg.validate()?;
    if pm.patch_count() < cfg.min_patches {
        return Err(Error::TooFewPatches {
            found: pm.patch_count(),
            required: cfg.min_patches,
        });
    }
    let seeds = box_seeds(pm, bbox, cfg.seed_outside_fraction);
    classify_with_seeds(pm, &seeds, cfg)
}

/// Smallest mean-Lab distance between any foreground and any background patch.
pub fn mcut_score(labeling: &FgLabeling, pm: &PatchMap) -> Result<f64> {
    mcut_from_features(
        pm.patches()
            .iter()
            .zip(labeling.patch_labels())
            .map(|(p, &fg)| (p.mean_lab, fg)),
    )
}

/// The score over bare `(feature, is_foreground)` pairs.
pub fn mcut_from_features(items: impl IntoIterator<Item = ([f64; 3], bool)>) -> Result<f64> {
    let (fg, bg): (Vec<_>, Vec<_>) = items.into_iter().partition(|(_, f)| *f);
    if fg.is_empty() || bg.is_empty() {
        return Err(Error::DegenerateSegmentation("m-cut needs both foreground and background patches"));
    }
    Ok(fg
        .iter()
        .flat_map(|(f, _)| bg.iter().map(move |(b, _)| lab_distance(f, b)))
        .fold(f64::INFINITY, f64::min))
}
