use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the segmentation stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image too small: {width}x{height} (need at least {min_width}x{min_height})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("invalid target size {target_w}x{target_h} for source {source_w}x{source_h}")]
    InvalidTarget {
        source_w: usize,
        source_h: usize,
        target_w: usize,
        target_h: usize,
    },

    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),

    #[error("too few patches: {found} (need at least {required})")]
    TooFewPatches { found: usize, required: usize },

    #[error("degenerate segmentation: {0}")]
    DegenerateSegmentation(&'static str),

    #[error("no viable candidate: every resolution was skipped")]
    NoViableCandidate,

    #[error("invalid override: {0}")]
    InvalidOverride(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("image codec error for {path:?}: {source}")]
    Codec {
        path: Option<PathBuf>,
        #[source]
        source: image::ImageError,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
