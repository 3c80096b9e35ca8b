//! End-to-end extraction: candidates, selection, trimap, matting, binarisation
//! and the final fragment-removal pass.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::figureground::{classify, classify_with_seeds, FgConfig};
use crate::imaging::{boundary_band_flags, upsample_mask, BinaryMask, BoundingBox, Image};
use crate::matting::{binarize, build_laplacian, solve_alpha, AlphaMatte, MattingConfig};
use crate::multires::{generate_candidates, override_selection, select, CandidateSet, DEFAULT_FACTORS};
use crate::superpixel::{segment, MeanShiftConfig};
use crate::trimap::{build_trimap_with_radius, Trimap, TrimapConfig, TrimapLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mean_shift: MeanShiftConfig,
    pub figure_ground: FgConfig,
    pub factors: Vec<usize>,
    pub trimap: TrimapConfig,
    pub matting: MattingConfig,
    /// Skip the final figure-ground pass.
    pub skip_refinement: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mean_shift: MeanShiftConfig::default(),
            figure_ground: FgConfig::default(),
            factors: DEFAULT_FACTORS.to_vec(),
            trimap: TrimapConfig::default(),
            matting: MattingConfig::default(),
            skip_refinement: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mean_shift.validate()?;
        self.figure_ground.validate()?;
        self.matting.validate()?;
        if self.factors.is_empty() || self.factors.contains(&0) {
            return Err(Error::InvalidConfig(format!("factors must be >= 1: {:?}", self.factors)));
        }
        if !(self.trimap.band_scale > 0.0) {
            return Err(Error::InvalidConfig("band scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Validation,
    Candidates,
    Selection,
    Trimap,
    Laplacian,
    Solve,
    Refinement,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Validation => "validation",
            Stage::Candidates => "candidates",
            Stage::Selection => "selection",
            Stage::Trimap => "trimap",
            Stage::Laplacian => "laplacian",
            Stage::Solve => "solve",
            Stage::Refinement => "refinement",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|error| PipelineError { stage, error })
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub candidates_ms: f64,
    pub trimap_ms: f64,
    pub laplacian_ms: f64,
    pub solve_ms: f64,
    pub refinement_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.candidates_ms + self.trimap_ms + self.laplacian_ms + self.solve_ms + self.refinement_ms
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Everything downstream of a chosen candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub factor: usize,
    pub trimap: Trimap,
    pub matte: AlphaMatte,
    pub pre_refine_mask: BinaryMask,
    pub final_mask: BinaryMask,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub candidates: CandidateSet,
    pub final_mask: BinaryMask,
    pub trimap: Trimap,
    pub matte: AlphaMatte,
    pub pre_refine_mask: BinaryMask,
    pub timings: StageTimings,
}

impl PipelineResult {
    pub fn selected_factor(&self) -> usize {
        self.candidates
            .selected()
            .map(|c| c.factor)
            .expect("a completed pipeline always has a selection")
    }
}

/// Second figure-ground pass seeded by the matting result: patches whose
/// pixels are mostly matting-background (or that lie wholly outside the box)
/// seed the background, then classification steps 2-5 run unchanged.
///
/// Best effort: too few patches or no usable seeds return `matting_mask`.
pub fn refine_mask(
    img: &Image,
    matting_mask: &BinaryMask,
    bbox: &BoundingBox,
    ms: &MeanShiftConfig,
    fg: &FgConfig,
) -> Result<BinaryMask> {
    if (img.width(), img.height()) != (matting_mask.width(), matting_mask.height()) {
        return Err(Error::DimensionMismatch(
            img.width(),
            img.height(),
            matting_mask.width(),
            matting_mask.height(),
        ));
    }
    if matting_mask.foreground_count() == 0 {
        return Ok(matting_mask.clone());
    }
    let pm = match segment(img, ms) {
        Ok(pm) => pm,
        Err(Error::ImageTooSmall { .. }) => return Ok(matting_mask.clone()),
        Err(e) => return Err(e),
    };
    if pm.patch_count() < fg.min_patches {
        return Ok(matting_mask.clone());
    }
    let mut bg_votes = vec![0usize; pm.patch_count()];
    for (&label, &is_fg) in pm.labels().iter().zip(matting_mask.labels()) {
        if !is_fg {
            bg_votes[label as usize] += 1;
        }
    }
    let overlaps = pm.bbox_overlaps(bbox);
    let seeds: Vec<bool> = pm
        .patches()
        .iter()
        .zip(bg_votes.iter().zip(&overlaps))
        .map(|(p, (&bg, &ov))| 2 * bg > p.area || ov == 0.0)
        .collect();
    match classify_with_seeds(&pm, &seeds, fg) {
        Ok(labeling) => Ok(labeling.into_mask()),
        Err(Error::InvalidBoundingBox(_)) => Ok(matting_mask.clone()),
        Err(e) => Err(e),
    }
}

/// Trimap, matting, binarisation and refinement for one candidate mask.
pub fn refine_from_candidate(
    img: &Image,
    bbox: &BoundingBox,
    factor: usize,
    candidate_mask: &BinaryMask,
    cfg: &PipelineConfig,
) -> std::result::Result<Refinement, PipelineError> {
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let radius = cfg.trimap.radius(factor);
    let trimap = build_trimap_with_radius(candidate_mask, img.width(), img.height(), factor, radius).at(Stage::Trimap)?;
    timings.trimap_ms = elapsed_ms(t);

    let t = Instant::now();
    let lap = build_laplacian(img, &cfg.matting).at(Stage::Laplacian)?;
    timings.laplacian_ms = elapsed_ms(t);

    let t = Instant::now();
    let matte = solve_alpha(&lap, &trimap, &cfg.matting).at(Stage::Solve)?;
    let pre_refine_mask = binarize(&matte);
    timings.solve_ms = elapsed_ms(t);

    let t = Instant::now();
    let final_mask = if cfg.skip_refinement {
        pre_refine_mask.clone()
    } else {
        let refined = refine_mask(img, &pre_refine_mask, bbox, &cfg.mean_shift, &cfg.figure_ground).at(Stage::Refinement)?;
        // refinement may only relabel inside the matting foreground or the band
        let allowed: Vec<bool> = pre_refine_mask
            .labels()
            .iter()
            .zip(trimap.labels())
            .map(|(&fg, &l)| fg || l == TrimapLabel::Unknown)
            .collect();
        BinaryMask::new(
            img.width(),
            img.height(),
            refined.labels().iter().zip(&allowed).map(|(&r, &a)| r && a).collect(),
        )
        .at(Stage::Refinement)?
    };
    timings.refinement_ms = elapsed_ms(t);

    Ok(Refinement {
        factor,
        trimap,
        matte,
        pre_refine_mask,
        final_mask,
        timings,
    })
}

/// Completes the pipeline from an existing candidate set; `index` selects a
/// candidate manually, otherwise the maxmin-cut winner is used.
pub fn finish_from_candidates(
    img: &Image,
    bbox: &BoundingBox,
    candidates: &CandidateSet,
    index: Option<usize>,
    cfg: &PipelineConfig,
) -> std::result::Result<PipelineResult, PipelineError> {
    let index = match index {
        Some(i) => i,
        None => select(candidates).at(Stage::Selection)?,
    };
    let candidates = override_selection(candidates, index).at(Stage::Selection)?;
    let chosen = candidates.selected().expect("selection was just set");
    let mask = chosen.labeling.as_ref().expect("selected candidates are viable").mask().clone();
    let refinement = refine_from_candidate(img, bbox, chosen.factor, &mask, cfg)?;
    Ok(PipelineResult {
        candidates,
        final_mask: refinement.final_mask,
        trimap: refinement.trimap,
        matte: refinement.matte,
        pre_refine_mask: refinement.pre_refine_mask,
        timings: refinement.timings,
    })
}

/// Runs the whole pipeline. `override_index` forces a candidate instead of
/// the automatic selection.
pub fn segment_image(
    img: &Image,
    bbox: &BoundingBox,
    cfg: &PipelineConfig,
    override_index: Option<usize>,
) -> std::result::Result<PipelineResult, PipelineError> {
    cfg.validate().at(Stage::Validation)?;
    bbox.validate(img.width(), img.height()).at(Stage::Validation)?;

    let t = Instant::now();
    let candidates =
        generate_candidates(img, bbox, &cfg.factors, &cfg.mean_shift, &cfg.figure_ground).at(Stage::Candidates)?;
    let candidates_ms = elapsed_ms(t);

    let mut result = finish_from_candidates(img, bbox, &candidates, override_index, cfg)?;
    result.timings.candidates_ms = candidates_ms;
    Ok(result)
}

/// Figure-ground classification on the full-resolution image only.
pub fn single_resolution_mask(img: &Image, bbox: &BoundingBox, cfg: &PipelineConfig) -> Result<BinaryMask> {
    bbox.validate(img.width(), img.height())?;
    let mut pm = segment(img, &cfg.mean_shift)?;
    pm.set_bounding_box(bbox);
    Ok(classify(&pm, bbox, &cfg.figure_ground)?.into_mask())
}

/// The selected candidate's mask upsampled to full size, without matting.
pub fn upsampled_selection(result: &PipelineResult) -> Result<BinaryMask> {
    let chosen = result.candidates.selected().ok_or(Error::NoViableCandidate)?;
    let mask = chosen.labeling.as_ref().ok_or(Error::NoViableCandidate)?.mask();
    upsample_mask(mask, result.final_mask.width(), result.final_mask.height())
}

/// Unknown-band flags of a trimap, for checking refinement containment.
pub fn unknown_flags(t: &Trimap) -> Vec<bool> {
    t.labels().iter().map(|&l| l == TrimapLabel::Unknown).collect()
}

#[doc(hidden)]
pub fn band_flags_for(mask: &BinaryMask, radius: usize) -> Vec<bool> {
    boundary_band_flags(mask, radius)
}
