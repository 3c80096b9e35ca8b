//! Settings merged from defaults, a flat TOML file and command-line flags,
//! in that order of precedence. File keys are the long flag names.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::Deserialize;

use matteforge::bench::{BenchConfig, Strategy};
use matteforge::pipeline::PipelineConfig;
use matteforge_service::ServiceConfig;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PipelineFlags {
    /// Mean-shift spatial bandwidth in pixels.
    #[arg(long)]
    pub spatial_bandwidth: Option<f64>,
    /// Mean-shift range bandwidth in Lab units.
    #[arg(long)]
    pub range_bandwidth: Option<f64>,
    /// Smallest patch kept, in pixels.
    #[arg(long)]
    pub min_area: Option<usize>,
    #[arg(long)]
    pub mean_shift_iters: Option<usize>,
    #[arg(long)]
    pub convergence_eps: Option<f64>,
    /// Patches overlapping the box less than this seed the background.
    #[arg(long)]
    pub seed_outside_fraction: Option<f64>,
    /// Candidates with fewer patches are skipped.
    #[arg(long)]
    pub min_patches: Option<usize>,
    #[arg(long)]
    pub fragment_area_fraction: Option<f64>,
    /// Downsample factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub factors: Option<Vec<usize>>,
    /// Unknown band radius as a multiple of the factor.
    #[arg(long)]
    pub band_scale: Option<f64>,
    #[arg(long)]
    pub window_radius: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub solver_tol: Option<f64>,
    #[arg(long)]
    pub solver_max_iters: Option<usize>,
    /// Stop after binarising the matte.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub skip_refinement: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($field:ident),+) => {
        Self { $($field: $over.$field.or($base.$field)),+ }
    };
}

impl PipelineFlags {
    pub fn overlay(self, over: Self) -> Self {
        overlay!(
            self,
            over,
            spatial_bandwidth,
            range_bandwidth,
            min_area,
            mean_shift_iters,
            convergence_eps,
            seed_outside_fraction,
            min_patches,
            fragment_area_fraction,
            factors,
            band_scale,
            window_radius,
            epsilon,
            lambda,
            solver_tol,
            solver_max_iters,
            skip_refinement
        )
    }

    pub fn resolve(&self) -> Result<PipelineConfig, String> {
        let mut c = PipelineConfig::default();
        let ms = &mut c.mean_shift;
        set(&mut ms.spatial_bandwidth, self.spatial_bandwidth);
        set(&mut ms.range_bandwidth, self.range_bandwidth);
        set(&mut ms.min_area, self.min_area);
        set(&mut ms.max_iters, self.mean_shift_iters);
        set(&mut ms.convergence_eps, self.convergence_eps);
        let fg = &mut c.figure_ground;
        set(&mut fg.seed_outside_fraction, self.seed_outside_fraction);
        set(&mut fg.min_patches, self.min_patches);
        set(&mut fg.fragment_area_fraction, self.fragment_area_fraction);
        set(&mut c.factors, self.factors.clone());
        set(&mut c.trimap.band_scale, self.band_scale);
        let m = &mut c.matting;
        set(&mut m.window_radius, self.window_radius);
        set(&mut m.epsilon, self.epsilon);
        set(&mut m.lambda, self.lambda);
        set(&mut m.solver_tol, self.solver_tol);
        set(&mut m.solver_max_iters, self.solver_max_iters);
        set(&mut c.skip_refinement, self.skip_refinement);
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchFlags {
    /// Strategies to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// Box dilation factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub looseness: Option<Vec<f64>>,
    /// Images evaluated concurrently; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub clutter_threshold: Option<usize>,
    /// Only evaluate images with more box patches than the clutter threshold.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub filter_cluttered: Option<bool>,
}

impl BenchFlags {
    pub fn overlay(self, over: Self) -> Self {
        overlay!(self, over, strategies, looseness, workers, clutter_threshold, filter_cluttered)
    }

    pub fn resolve(&self, pipeline: PipelineConfig, thread_cap: Option<usize>) -> (BenchConfig, Vec<Strategy>) {
        let mut workers = self.workers.unwrap_or(0);
        if let Some(cap) = thread_cap {
            workers = if workers == 0 { cap } else { workers.min(cap) };
        }
        let defaults = BenchConfig::default();
        let cfg = BenchConfig {
            pipeline,
            looseness: self.looseness.clone().unwrap_or(defaults.looseness),
            workers,
            clutter_threshold: self.clutter_threshold.unwrap_or(defaults.clutter_threshold),
            filter_cluttered: self.filter_cluttered.unwrap_or(false),
            mask_dir: None,
        };
        let strategies = self.strategies.clone().unwrap_or_else(|| Strategy::ALL.to_vec());
        (cfg, strategies)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ServeFlags {
    /// Address to bind.
    #[arg(long)]
    pub addr: Option<String>,
    /// Mirror sessions to this directory and reload them on start.
    #[arg(long)]
    pub persist_dir: Option<PathBuf>,
    /// Idle seconds before a session is evicted.
    #[arg(long)]
    pub ttl_secs: Option<u64>,
    /// Per-request compute limit in seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub max_upload_mb: Option<usize>,
    /// Allowed browser origin; any when unset.
    #[arg(long)]
    pub cors_origin: Option<String>,
}

impl ServeFlags {
    pub fn overlay(self, over: Self) -> Self {
        overlay!(self, over, addr, persist_dir, ttl_secs, timeout_secs, max_upload_mb, cors_origin)
    }

    pub fn resolve(&self, pipeline: PipelineConfig) -> ServiceConfig {
        let d = ServiceConfig::default();
        ServiceConfig {
            max_upload_bytes: self.max_upload_mb.map_or(d.max_upload_bytes, |mb| mb * 1024 * 1024),
            compute_timeout: self.timeout_secs.map_or(d.compute_timeout, Duration::from_secs),
            session_ttl: self.ttl_secs.map_or(d.session_ttl, Duration::from_secs),
            persist_dir: self.persist_dir.clone(),
            cors_origin: self.cors_origin.clone(),
            pipeline,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    #[serde(flatten)]
    pub pipeline: PipelineFlags,
    #[serde(flatten)]
    pub bench: BenchFlags,
    #[serde(flatten)]
    pub serve: ServeFlags,
}

const KNOWN_KEYS: &[&str] = &[
    "spatial-bandwidth",
    "range-bandwidth",
    "min-area",
    "mean-shift-iters",
    "convergence-eps",
    "seed-outside-fraction",
    "min-patches",
    "fragment-area-fraction",
    "factors",
    "band-scale",
    "window-radius",
    "epsilon",
    "lambda",
    "solver-tol",
    "solver-max-iters",
    "skip-refinement",
    "strategies",
    "looseness",
    "workers",
    "clutter-threshold",
    "filter-cluttered",
    "addr",
    "persist-dir",
    "ttl-secs",
    "timeout-secs",
    "max-upload-mb",
    "cors-origin",
];

pub fn load_file(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(format!("config {}: unknown key {key:?}", path.display()));
    }
    FileConfig::deserialize(table).map_err(|e| format!("config {}: {e}", path.display()))
}
