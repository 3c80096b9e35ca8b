//! Dataset manifests, F-measure evaluation and strategy comparison reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::disk_on_texture;
use crate::imaging::{BinaryMask, BoundingBox, Image};
use crate::io::{load_image, load_mask, save_image, save_mask, write_bytes};
use crate::pipeline::{segment_image, single_resolution_mask, upsampled_selection, PipelineConfig, StageTimings};
use crate::superpixel::{count_patches_in_roi, segment, MeanShiftConfig};

/// Images with more patches than this inside the box count as cluttered.
pub const CLUTTER_THRESHOLD: usize = 300;

/// Segmentation strategies that can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Candidates, matting and the final figure-ground pass.
    Full,
    /// Stops after binarising the matte.
    NoRefine,
    /// The selected candidate upsampled, no matting.
    MultiresOnly,
    /// Figure-ground classification on the original image only.
    SingleResolution,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Full,
        Strategy::NoRefine,
        Strategy::MultiresOnly,
        Strategy::SingleResolution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::NoRefine => "no-refine",
            Strategy::MultiresOnly => "multires-only",
            Strategy::SingleResolution => "single-resolution",
        }
    }

    fn needs_pipeline(self) -> bool {
        !matches!(self, Strategy::SingleResolution)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}; expected one of full, no-refine, multires-only, single-resolution"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    /// Annotated box; when absent the ground truth's tight box is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
}

/// A list of entries. On disk it is JSON with paths relative to the
/// manifest's own directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<DatasetEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut manifest.entries {
            if e.image.is_relative() {
                e.image = base.join(&e.image);
            }
            if e.ground_truth.is_relative() {
                e.ground_truth = base.join(&e.ground_truth);
            }
        }
        Ok(manifest)
    }

    /// Writes the manifest, storing paths relative to its directory where
    /// possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: &Path| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        let stored = Manifest {
            entries: self
                .entries
                .iter()
                .map(|e| DatasetEntry {
                    name: e.name.clone(),
                    image: rel(&e.image),
                    ground_truth: rel(&e.ground_truth),
                    bbox: e.bbox,
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&stored).expect("manifest serialises");
        write_bytes(path, json.as_bytes())
    }
}

/// Builds a manifest from a directory laid out as
///
/// ```text
/// images/<name>.png|.jpg|.jpeg     photographs
/// ground_truth/<name>.png          masks, gray >= 128 is foreground
/// boxes/<name>.txt                 optional rectangle: "left top right bottom", inclusive
/// boxes/<name>.png                 optional lasso mask; its tight box is used
/// ```
///
/// GrabCut-style ground truth (0 / 128 / 255) therefore counts the mixed
/// 128 pixels as foreground. Images without a ground-truth file are skipped.
pub fn import_directory(dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for item in fs::read_dir(dir.join("images"))? {
        let path = item?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        let gt = dir.join("ground_truth").join(format!("{name}.png"));
        if !gt.is_file() {
            continue;
        }
        let bbox = read_box_annotation(&dir.join("boxes"), &name)?;
        entries.push(DatasetEntry {
            name,
            image: path,
            ground_truth: gt,
            bbox,
        });
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(Manifest { entries })
}

fn read_box_annotation(dir: &Path, name: &str) -> Result<Option<BoundingBox>> {
    let txt = dir.join(format!("{name}.txt"));
    if txt.is_file() {
        let text = fs::read_to_string(&txt)?;
        let v: Vec<usize> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidBoundingBox(format!("{}: {e}", txt.display())))?;
        return match v[..] {
            [l, t, r, b] if r >= l && b >= t => Ok(Some(BoundingBox::new(l, t, r - l + 1, b - t + 1))),
            _ => Err(Error::InvalidBoundingBox(format!(
                "{}: expected \"left top right bottom\"",
                txt.display()
            ))),
        };
    }
    let lasso = dir.join(format!("{name}.png"));
    if lasso.is_file() {
        let mask = load_mask(&lasso)?;
        return mask
            .foreground_bounds()
            .map(Some)
            .ok_or_else(|| Error::InvalidBoundingBox(format!("{}: empty lasso", lasso.display())));
    }
    Ok(None)
}

/// Precision, recall and F-measure over foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Scores {
    /// From |pred ∩ gt|, |pred| and |gt|. Two empty masks agree perfectly;
    /// exactly one empty mask scores zero.
    pub fn from_counts(intersection: usize, predicted: usize, truth: usize) -> Self {
        if predicted == 0 && truth == 0 {
            return Self {
                precision: 1.0,
                recall: 1.0,
                f_measure: 1.0,
            };
        }
        let ratio = |den: usize| if den == 0 { 0.0 } else { intersection as f64 / den as f64 };
        let (p, r) = (ratio(predicted), ratio(truth));
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Self {
            precision: p,
            recall: r,
            f_measure: f,
        }
    }

    pub const ZERO: Scores = Scores {
        precision: 0.0,
        recall: 0.0,
        f_measure: 0.0,
    };
}

pub fn precision_recall(pred: &BinaryMask, gt: &BinaryMask) -> Result<Scores> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    let inter = pred.labels().iter().zip(gt.labels()).filter(|(a, b)| **a && **b).count();
    Ok(Scores::from_counts(inter, pred.foreground_count(), gt.foreground_count()))
}

pub fn f_measure(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    precision_recall(pred, gt).map(|s| s.f_measure)
}

pub fn roi_patch_count(img: &Image, bbox: &BoundingBox, ms: &MeanShiftConfig) -> Result<usize> {
    let pm = segment(img, ms)?;
    Ok(count_patches_in_roi(&pm, bbox))
}

/// More than `threshold` patches inside the box.
pub fn is_cluttered_with_threshold(img: &Image, bbox: &BoundingBox, ms: &MeanShiftConfig, threshold: usize) -> bool {
    roi_patch_count(img, bbox, ms).is_ok_and(|n| n > threshold)
}

pub fn is_cluttered(img: &Image, bbox: &BoundingBox, ms: &MeanShiftConfig) -> bool {
    is_cluttered_with_threshold(img, bbox, ms, CLUTTER_THRESHOLD)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub pipeline: PipelineConfig,
    /// Box dilation factors; 1.0 is the annotated or tight box.
    pub looseness: Vec<f64>,
    /// Entries evaluated concurrently; 0 uses every core.
    pub workers: usize,
    pub clutter_threshold: usize,
    /// Only evaluate images with more than `clutter_threshold` box patches.
    pub filter_cluttered: bool,
    /// Where per-entry masks are written, if anywhere. Not recorded in
    /// reports, so a report does not depend on where it was written.
    #[serde(skip)]
    pub mask_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            looseness: vec![1.0],
            workers: 0,
            clutter_threshold: CLUTTER_THRESHOLD,
            filter_cluttered: false,
            mask_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.looseness.is_empty() || self.looseness.iter().any(|&l| !(l >= 1.0) || !l.is_finite()) {
            return Err(Error::InvalidConfig(format!("looseness factors must be >= 1: {:?}", self.looseness)));
        }
        Ok(())
    }
}

/// An entry already in memory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub image: Image,
    pub ground_truth: BinaryMask,
    pub bbox: Option<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub scores: Scores,
    /// Set when the strategy failed; its scores are then zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub name: String,
    pub looseness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi_patches: Option<usize>,
    /// Why the image is left out of the aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_factor: Option<usize>,
    pub patch_counts: Vec<usize>,
    pub outcomes: Vec<StrategyOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_resolution_ms: Option<f64>,
}

impl ImageResult {
    pub fn outcome(&self, strategy: Strategy) -> Option<&StrategyOutcome> {
        self.outcomes.iter().find(|o| o.strategy == strategy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: Strategy,
    pub looseness: f64,
    pub images: usize,
    pub failures: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: BenchConfig,
    pub strategies: Vec<Strategy>,
    pub images: Vec<ImageResult>,
    pub aggregates: Vec<Aggregate>,
}

impl EvalReport {
    pub fn aggregate(&self, strategy: Strategy, looseness: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.strategy == strategy && a.looseness == looseness)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per image and strategy; timings are left out.
    pub fn per_image_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "name",
            "looseness",
            "strategy",
            "precision",
            "recall",
            "f_measure",
            "selected_factor",
            "roi_patches",
            "error",
        ])
        .map_err(csv_err)?;
        for img in &self.images {
            let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            if let Some(why) = &img.excluded {
                w.write_record([&img.name, &img.looseness.to_string(), "", "", "", "", "", &opt(img.roi_patches), why])
                    .map_err(csv_err)?;
                continue;
            }
            for o in &img.outcomes {
                w.write_record([
                    img.name.clone(),
                    img.looseness.to_string(),
                    o.strategy.to_string(),
                    format!("{:.6}", o.scores.precision),
                    format!("{:.6}", o.scores.recall),
                    format!("{:.6}", o.scores.f_measure),
                    opt(img.selected_factor),
                    opt(img.roi_patches),
                    o.error.clone().unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
        finish_csv(w)
    }

    pub fn aggregate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "strategy",
            "looseness",
            "images",
            "failures",
            "mean_precision",
            "mean_recall",
            "mean_f_measure",
        ])
        .map_err(csv_err)?;
        for a in &self.aggregates {
            w.write_record([
                a.strategy.to_string(),
                a.looseness.to_string(),
                a.images.to_string(),
                a.failures.to_string(),
                format!("{:.6}", a.mean_precision),
                format!("{:.6}", a.mean_recall),
                format!("{:.6}", a.mean_f_measure),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Writes `report.json`, `report.csv` (per image) and `aggregate.csv` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_bytes(dir.join("report.json"), self.to_json().as_bytes())?;
        write_bytes(dir.join("report.csv"), self.per_image_csv()?.as_bytes())?;
        write_bytes(dir.join("aggregate.csv"), self.aggregate_csv()?.as_bytes())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn load_entry(entry: &DatasetEntry) -> Result<Sample> {
    let image = load_image(&entry.image)?;
    let ground_truth = load_mask(&entry.ground_truth)?;
    Ok(Sample {
        name: entry.name.clone(),
        image,
        ground_truth,
        bbox: entry.bbox,
    })
}

/// Loads every entry from disk and evaluates it. Unreadable entries are
/// reported and left out of the aggregates.
pub fn run_benchmark(entries: &[DatasetEntry], strategies: &[Strategy], cfg: &BenchConfig) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one entry".into()));
    }
    let loaded: Vec<std::result::Result<Sample, (String, String)>> = entries
        .iter()
        .map(|e| load_entry(e).map_err(|err| (e.name.clone(), err.to_string())))
        .collect();
    evaluate(loaded, strategies, cfg)
}

/// Same as [`run_benchmark`] for samples already in memory.
pub fn run_benchmark_samples(samples: Vec<Sample>, strategies: &[Strategy], cfg: &BenchConfig) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one entry".into()));
    }
    evaluate(samples.into_iter().map(Ok).collect(), strategies, cfg)
}

fn evaluate(
    samples: Vec<std::result::Result<Sample, (String, String)>>,
    strategies: &[Strategy],
    cfg: &BenchConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let mut strategies = strategies.to_vec();
    strategies.dedup();
    let jobs: Vec<(usize, f64)> = cfg
        .looseness
        .iter()
        .flat_map(|&l| (0..samples.len()).map(move |i| (i, l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let images: Vec<ImageResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, looseness)| match &samples[i] {
                Ok(sample) => evaluate_one(sample, looseness, &strategies, cfg),
                Err((name, why)) => ImageResult {
                    name: name.clone(),
                    looseness,
                    bbox: None,
                    roi_patches: None,
                    excluded: Some(format!("load failed: {why}")),
                    selected_factor: None,
                    patch_counts: Vec::new(),
                    outcomes: Vec::new(),
                    timings: None,
                    single_resolution_ms: None,
                },
            })
            .collect()
    });

    let mut aggregates = Vec::new();
    for &looseness in &cfg.looseness {
        for &strategy in &strategies {
            let outcomes: Vec<&StrategyOutcome> = images
                .iter()
                .filter(|r| r.looseness == looseness && r.excluded.is_none())
                .filter_map(|r| r.outcome(strategy))
                .collect();
            let n = outcomes.len();
            let mean = |f: fn(&Scores) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    outcomes.iter().map(|o| f(&o.scores)).sum::<f64>() / n as f64
                }
            };
            aggregates.push(Aggregate {
                strategy,
                looseness,
                images: n,
                failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
                mean_precision: mean(|s| s.precision),
                mean_recall: mean(|s| s.recall),
                mean_f_measure: mean(|s| s.f_measure),
            });
        }
    }
    Ok(EvalReport {
        config: cfg.clone(),
        strategies,
        images,
        aggregates,
    })
}

fn evaluate_one(sample: &Sample, looseness: f64, strategies: &[Strategy], cfg: &BenchConfig) -> ImageResult {
    let (w, h) = (sample.image.width(), sample.image.height());
    let mut result = ImageResult {
        name: sample.name.clone(),
        looseness,
        bbox: None,
        roi_patches: None,
        excluded: None,
        selected_factor: None,
        patch_counts: Vec::new(),
        outcomes: Vec::new(),
        timings: None,
        single_resolution_ms: None,
    };
    if (sample.ground_truth.width(), sample.ground_truth.height()) != (w, h) {
        result.excluded = Some(
            Error::DimensionMismatch(w, h, sample.ground_truth.width(), sample.ground_truth.height()).to_string(),
        );
        return result;
    }
    let Some(base) = sample.bbox.or_else(|| sample.ground_truth.foreground_bounds()) else {
        result.excluded = Some("ground truth is empty and no box is annotated".into());
        return result;
    };
    let bbox = base.dilated(looseness, w, h);
    if let Err(e) = bbox.validate(w, h) {
        result.excluded = Some(e.to_string());
        return result;
    }
    result.bbox = Some(bbox);

    if cfg.filter_cluttered {
        match roi_patch_count(&sample.image, &bbox, &cfg.pipeline.mean_shift) {
            Ok(n) => {
                result.roi_patches = Some(n);
                if n <= cfg.clutter_threshold {
                    result.excluded = Some(format!("not cluttered: {n} patches in box"));
                    return result;
                }
            }
            Err(e) => {
                result.excluded = Some(format!("clutter check failed: {e}"));
                return result;
            }
        }
    }

    let mut masks: Vec<(Strategy, std::result::Result<BinaryMask, String>)> = Vec::new();
    if strategies.iter().any(|s| s.needs_pipeline()) {
        match segment_image(&sample.image, &bbox, &cfg.pipeline, None) {
            Ok(r) => {
                result.selected_factor = Some(r.selected_factor());
                result.patch_counts = r.candidates.candidates.iter().map(|c| c.patch_count).collect();
                result.timings = Some(r.timings);
                for &s in strategies {
                    let m = match s {
                        Strategy::Full => Ok(r.final_mask.clone()),
                        Strategy::NoRefine => Ok(r.pre_refine_mask.clone()),
                        Strategy::MultiresOnly => upsampled_selection(&r).map_err(|e| e.to_string()),
                        Strategy::SingleResolution => continue,
                    };
                    masks.push((s, m));
                }
            }
            Err(e) => {
                for &s in strategies.iter().filter(|s| s.needs_pipeline()) {
                    masks.push((s, Err(e.to_string())));
                }
            }
        }
    }
    if strategies.contains(&Strategy::SingleResolution) {
        let t = Instant::now();
        let m = single_resolution_mask(&sample.image, &bbox, &cfg.pipeline).map_err(|e| e.to_string());
        result.single_resolution_ms = Some(t.elapsed().as_secs_f64() * 1e3);
        masks.push((Strategy::SingleResolution, m));
    }

    for &s in strategies {
        let Some((_, m)) = masks.iter().find(|(ms, _)| *ms == s) else {
            continue;
        };
        let outcome = match m {
            Ok(mask) => {
                let mut error = None;
                if let Some(dir) = &cfg.mask_dir {
                    let path = dir.join(format!("{looseness}")).join(&sample.name).join(format!("{s}.png"));
                    if let Err(e) = save_mask(&path, mask) {
                        error = Some(format!("writing mask: {e}"));
                    }
                }
                match precision_recall(mask, &sample.ground_truth) {
                    Ok(scores) => StrategyOutcome {
                        strategy: s,
                        scores,
                        error,
                    },
                    Err(e) => StrategyOutcome {
                        strategy: s,
                        scores: Scores::ZERO,
                        error: Some(e.to_string()),
                    },
                }
            }
            Err(why) => StrategyOutcome {
                strategy: s,
                scores: Scores::ZERO,
                error: Some(why.clone()),
            },
        };
        result.outcomes.push(outcome);
    }
    result
}

/// Writes `count` disk-on-texture samples of `size` pixels under `dir`
/// (`images/`, `ground_truth/`, `manifest.json`) and returns the manifest.
pub fn write_disk_corpus(dir: impl AsRef<Path>, count: usize, size: usize, first_seed: u64) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let seed = first_seed + i as u64;
        let sample = disk_on_texture(size, seed);
        let name = format!("disk_{seed:03}");
        let image = dir.join("images").join(format!("{name}.png"));
        let ground_truth = dir.join("ground_truth").join(format!("{name}.png"));
        save_image(&image, &sample.image)?;
        save_mask(&ground_truth, &sample.ground_truth)?;
        entries.push(DatasetEntry {
            name,
            image,
            ground_truth,
            bbox: None,
        });
    }
    let manifest = Manifest { entries };
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}

/// The disk corpus as in-memory samples.
pub fn disk_samples(count: usize, size: usize, first_seed: u64) -> Vec<Sample> {
    (0..count)
        .map(|i| {
            let seed = first_seed + i as u64;
            let s = disk_on_texture(size, seed);
            Sample {
                name: format!("disk_{seed:03}"),
                image: s.image,
                ground_truth: s.ground_truth,
                bbox: None,
            }
        })
        .collect()
}
