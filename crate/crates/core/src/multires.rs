//! Candidate segmentations at several reduced resolutions and the maxmin-cut
//! selection between them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::figureground::{classify, mcut_score, FgConfig, FgLabeling};
use crate::imaging::{downsample, BoundingBox, Image};
use crate::superpixel::{segment, MeanShiftConfig};

pub const DEFAULT_FACTORS: [usize; 5] = [2, 4, 6, 8, 10];

/// One resolution's segmentation attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub factor: usize,
    pub image: Option<Image>,
    /// Box mapped onto the reduced image, when that was possible.
    pub bbox: Option<BoundingBox>,
    pub patch_count: usize,
    pub labeling: Option<FgLabeling>,
    /// Maxmin-cut score, `-inf` when skipped.
    pub score: f64,
    pub skip_reason: Option<String>,
}

impl Candidate {
    pub fn is_skipped(&self) -> bool {
        self.labeling.is_none()
    }

    fn skipped(factor: usize, image: Option<Image>, bbox: Option<BoundingBox>, patch_count: usize, why: &Error) -> Self {
        Self {
            factor,
            image,
            bbox,
            patch_count,
            labeling: None,
            score: f64::NEG_INFINITY,
            skip_reason: Some(why.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub selected_index: Option<usize>,
}

/// Manifest row for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub factor: usize,
    pub patch_count: usize,
    /// `None` encodes a skipped candidate's `-inf`.
    pub score: Option<f64>,
    pub skipped: bool,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

impl CandidateSet {
    pub fn scores(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.score).collect()
    }

    pub fn selected(&self) -> Option<&Candidate> {
        self.selected_index.map(|i| &self.candidates[i])
    }

    pub fn index_of_factor(&self, factor: usize) -> Option<usize> {
        self.candidates.iter().position(|c| c.factor == factor)
    }

    pub fn records(&self) -> Vec<CandidateRecord> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateRecord {
                factor: c.factor,
                patch_count: c.patch_count,
                score: (!c.is_skipped()).then_some(c.score),
                skipped: c.is_skipped(),
                selected: self.selected_index == Some(i),
                skip_reason: c.skip_reason.clone(),
            })
            .collect()
    }
}

fn attempt(img: &Image, bbox: &BoundingBox, factor: usize, ms: &MeanShiftConfig, fg: &FgConfig) -> Candidate {
    let small = match downsample(img, factor) {
        Ok(s) => s,
        Err(e) => return Candidate::skipped(factor, None, None, 0, &e),
    };
    let scaled = match bbox.scaled_down(factor, small.width(), small.height()) {
        Ok(b) => b,
        Err(e) => return Candidate::skipped(factor, Some(small), None, 0, &e),
    };
    let mut pm = match segment(&small, ms) {
        Ok(pm) => pm,
        Err(e) => return Candidate::skipped(factor, Some(small), Some(scaled), 0, &e),
    };
    pm.set_bounding_box(&scaled);
    let patch_count = pm.patch_count();
    let labeling = match classify(&pm, &scaled, fg) {
        Ok(l) => l,
        Err(e) => return Candidate::skipped(factor, Some(small), Some(scaled), patch_count, &e),
    };
    match mcut_score(&labeling, &pm) {
        Ok(score) => Candidate {
            factor,
            image: Some(small),
            bbox: Some(scaled),
            patch_count,
            labeling: Some(labeling),
            score,
            skip_reason: None,
        },
        Err(e) => Candidate::skipped(factor, Some(small), Some(scaled), patch_count, &e),
    }
}

/// Segments `img` at every factor independently. A failure at one factor
/// marks that candidate skipped; only a fully skipped set is an error.
pub fn generate_candidates(
    img: &Image,
    bbox: &BoundingBox,
    factors: &[usize],
    ms: &MeanShiftConfig,
    fg: &FgConfig,
) -> Result<CandidateSet> {
    bbox.validate(img.width(), img.height())?;
    ms.validate()?;
    fg.validate()?;
    if factors.is_empty() || factors.contains(&0) {
        return Err(Error::InvalidConfig(format!("factors must be non-empty and >= 1: {factors:?}")));
    }
    let candidates: Vec<Candidate> = factors
        .par_iter()
        .map(|&k| attempt(img, bbox, k, ms, fg))
        .collect();
    if candidates.iter().all(Candidate::is_skipped) {
        return Err(Error::NoViableCandidate);
    }
    Ok(CandidateSet {
        candidates,
        selected_index: None,
    })
}

/// Argmax over scores, ignoring `-inf`/NaN; ties go to the lower index.
pub fn argmax_score(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() || s == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the best-scoring non-skipped candidate; ties favour the smaller
/// factor, which is listed first.
pub fn select(cs: &CandidateSet) -> Result<usize> {
    let scores: Vec<f64> = cs
        .candidates
        .iter()
        .map(|c| if c.is_skipped() { f64::NEG_INFINITY } else { c.score })
        .collect();
    argmax_score(&scores).ok_or(Error::NoViableCandidate)
}

/// Manually picks candidate `index`; scores are untouched.
pub fn override_selection(cs: &CandidateSet, index: usize) -> Result<CandidateSet> {
    let Some(c) = cs.candidates.get(index) else {
        return Err(Error::InvalidOverride(format!(
            "index {index} out of range (have {} candidates)",
            cs.candidates.len()
        )));
    };
    if c.is_skipped() {
        return Err(Error::InvalidOverride(format!("candidate at factor {} was skipped", c.factor)));
    }
    Ok(CandidateSet {
        candidates: cs.candidates.clone(),
        selected_index: Some(index),
    })
}
