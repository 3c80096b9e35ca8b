use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;

use matteforge::bench::{run_benchmark, write_disk_corpus, Manifest};
use matteforge::imaging::BoundingBox;
use matteforge::io::{encode_gray_png, load_image, save_mask, write_bytes};
use matteforge::multires::CandidateRecord;
use matteforge::pipeline::{segment_image, PipelineConfig, PipelineError, Stage, StageTimings};
use matteforge::Error;

use crate::config::load_file;
use crate::{BenchArgs, FixturesArgs, SegmentArgs, ServeArgs};

pub enum CliError {
    Usage(String),
    Pipeline(String),
    Failure(String),
}

impl CliError {
    pub fn report(&self) -> ExitCode {
        let (code, msg) = match self {
            CliError::Usage(m) => (2, m),
            CliError::Pipeline(m) => (3, m),
            CliError::Failure(m) => (1, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Sizes the global rayon pool from `MATTEFORGE_THREADS`, returning the cap.
pub fn init_threads() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var("MATTEFORGE_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MATTEFORGE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(failure)?;
    Ok(Some(n))
}

#[derive(Serialize)]
struct SegmentManifest<'a> {
    input: String,
    bbox: BoundingBox,
    selected_factor: usize,
    foreground_pixels: usize,
    candidates: Vec<CandidateRecord>,
    config: &'a PipelineConfig,
}

#[derive(Serialize)]
struct Timings {
    stages: StageTimings,
    total_ms: f64,
}

fn write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), CliError> {
    write_bytes(path, bytes).map_err(failure)
}

pub fn segment(args: SegmentArgs) -> Result<(), CliError> {
    let file = load_file(args.config.as_deref()).map_err(CliError::Usage)?;
    let cfg = file.pipeline.overlay(args.pipeline).resolve().map_err(CliError::Usage)?;
    let img = load_image(&args.input).map_err(|e| CliError::Usage(e.to_string()))?;
    args.bbox
        .validate(img.width(), img.height())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let override_index = match args.override_factor {
        None => None,
        Some(f) => Some(cfg.factors.iter().position(|&k| k == f).ok_or_else(|| {
            CliError::Pipeline(
                PipelineError {
                    stage: Stage::Selection,
                    error: Error::InvalidOverride(format!("factor {f} is not among {:?}", cfg.factors)),
                }
                .to_string(),
            )
        })?),
    };

    let result = segment_image(&img, &args.bbox, &cfg, override_index).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let out = &args.out;
    save_mask(out.join("final_mask.png"), &result.final_mask).map_err(failure)?;
    if args.dump_intermediates {
        let (w, h) = (img.width(), img.height());
        write(out.join("matte.png"), &encode_gray_png(w, h, result.matte.to_gray()).map_err(failure)?)?;
        write(out.join("trimap.png"), &encode_gray_png(w, h, result.trimap.to_gray()).map_err(failure)?)?;
        save_mask(out.join("pre_refine_mask.png"), &result.pre_refine_mask).map_err(failure)?;
        for c in &result.candidates.candidates {
            if let Some(l) = &c.labeling {
                save_mask(out.join("candidates").join(format!("candidate-{}.png", c.factor)), l.mask()).map_err(failure)?;
            }
        }
        let manifest = SegmentManifest {
            input: args.input.display().to_string(),
            bbox: args.bbox,
            selected_factor: result.selected_factor(),
            foreground_pixels: result.final_mask.foreground_count(),
            candidates: result.candidates.records(),
            config: &cfg,
        };
        write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).map_err(failure)?.as_bytes())?;
        let timings = Timings {
            stages: result.timings,
            total_ms: result.timings.total_ms(),
        };
        write(out.join("timings.json"), serde_json::to_string_pretty(&timings).map_err(failure)?.as_bytes())?;
    }
    println!(
        "selected factor {}; {} foreground pixels; wrote {}",
        result.selected_factor(),
        result.final_mask.foreground_count(),
        out.display()
    );
    Ok(())
}

pub fn bench(args: BenchArgs, thread_cap: Option<usize>) -> Result<(), CliError> {
    let file = load_file(args.config.as_deref()).map_err(CliError::Usage)?;
    let pipeline = file.pipeline.overlay(args.pipeline).resolve().map_err(CliError::Usage)?;
    let (mut cfg, strategies) = file.bench.overlay(args.bench).resolve(pipeline, thread_cap);
    if args.write_masks {
        cfg.mask_dir = Some(args.out.join("masks"));
    }
    let manifest = Manifest::load(&args.manifest).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_benchmark(&manifest.entries, &strategies, &cfg).map_err(|e| match e {
        Error::InvalidConfig(m) => CliError::Usage(m),
        other => failure(other),
    })?;
    report.write(&args.out).map_err(failure)?;

    let evaluated = report.images.iter().filter(|r| r.excluded.is_none()).count();
    if evaluated == 0 {
        eprintln!("warning: no image was evaluated; see report.json for the reasons");
    }
    for r in report.images.iter().filter(|r| r.excluded.is_some()) {
        eprintln!("note: {} (looseness {}): {}", r.name, r.looseness, r.excluded.as_deref().unwrap_or_default());
    }
    println!("{:<18} {:>9} {:>7} {:>9} {:>9}", "strategy", "looseness", "images", "mean F", "failures");
    for a in &report.aggregates {
        println!(
            "{:<18} {:>9} {:>7} {:>9.4} {:>9}",
            a.strategy.to_string(),
            a.looseness,
            a.images,
            a.mean_f_measure,
            a.failures
        );
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let file = load_file(args.config.as_deref()).map_err(CliError::Usage)?;
    let pipeline = file.pipeline.overlay(args.pipeline).resolve().map_err(CliError::Usage)?;
    let flags = file.serve.overlay(args.serve);
    let addr: SocketAddr = flags
        .addr
        .as_deref()
        .unwrap_or("127.0.0.1:8080")
        .parse()
        .map_err(|e| CliError::Usage(format!("bad --addr: {e}")))?;
    let config = flags.resolve(pipeline);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(failure)?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(matteforge_service::serve(addr, config)).map_err(failure)
}

pub fn fixtures(args: FixturesArgs) -> Result<(), CliError> {
    if args.size < 40 || args.count == 0 {
        return Err(CliError::Usage("need --count >= 1 and --size >= 40".into()));
    }
    let m = write_disk_corpus(&args.out, args.count, args.size, args.seed).map_err(failure)?;
    println!("wrote {} samples and manifest.json to {}", m.entries.len(), args.out.display());
    Ok(())
}
