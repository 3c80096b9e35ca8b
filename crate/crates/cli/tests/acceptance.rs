//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use matteforge::bench::{is_cluttered, roi_patch_count, run_benchmark, write_disk_corpus, BenchConfig, EvalReport, Strategy};
use matteforge::figureground::{FgConfig, FgLabeling};
use matteforge::fixtures::{cell_grid, cluttered_texture, sparse_blocks};
use matteforge::imaging::{BoundingBox, Image, LabImage};
use matteforge::matting::{binarize, build_laplacian, solve_alpha_raw, AlphaMatte, MattingConfig};
use matteforge::multires::{generate_candidates, select, Candidate, CandidateSet, DEFAULT_FACTORS};
use matteforge::solver::JacobiCg;
use matteforge::superpixel::{MeanShiftConfig, PatchMap};
use matteforge::trimap::{Trimap, TrimapLabel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- Laplacian

/// Per-window least-squares elimination: minimising
/// sum (alpha_i - a.I_i - b)^2 + eps |a|^2 over (a, b) leaves alpha^T Q alpha
/// with Q the complement of the projector onto the regularised design matrix.
fn oracle_laplacian(img: &Image, eps: f64) -> DMatrix<f64> {
    let (w, h) = (img.width(), img.height());
    let mut l = DMatrix::zeros(w * h, w * h);
    for cy in 1..h - 1 {
        for cx in 1..w - 1 {
            let idx: Vec<usize> = (cy - 1..=cy + 1)
                .flat_map(|y| (cx - 1..=cx + 1).map(move |x| y * w + x))
                .collect();
            let mut g = DMatrix::zeros(12, 4);
            for (r, &p) in idx.iter().enumerate() {
                let c = img.pixels()[p];
                g[(r, 0)] = c[0];
                g[(r, 1)] = c[1];
                g[(r, 2)] = c[2];
                g[(r, 3)] = 1.0;
            }
            for c in 0..3 {
                g[(9 + c, c)] = eps.sqrt();
            }
            let inv = (g.transpose() * &g).try_inverse().ok_or("singular").unwrap();
            let q = DMatrix::<f64>::identity(12, 12) - &g * inv * g.transpose();
            for a in 0..9 {
                for b in 0..9 {
                    l[(idx[a], idx[b])] += q[(a, b)];
                }
            }
        }
    }
    l
}

fn laplacian_correctness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = MattingConfig::default();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let side = 4 + case % 2;
        let img = Image::from_fn(side, side, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
        let lap = build_laplacian(&img, &cfg).map_err(|e| e.to_string())?;
        let oracle = oracle_laplacian(&img, cfg.epsilon);
        let n = side * side;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((lap.matrix.get(i, j) - oracle[(i, j)]).abs());
            }
        }
        ensure(lap.matrix.is_exactly_symmetric(), format!("case {case} not symmetric"))?;
        let rs = lap.matrix.row_sums().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        ensure(rs < 1e-9, format!("case {case} row sum {rs:e}"))?;
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = lap.matrix.quadratic_form(&x);
            ensure(q >= -1e-12, format!("case {case} quadratic form {q:e}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-8, format!("max entry error {worst:e}"))?;
    ensure(secs < 5.0, format!("took {secs:.2} s"))?;
    Ok(format!("max entry error {worst:.1e}, {secs:.2} s"))
}

// ---------------------------------------------------------------- matting

fn matting_recovery() -> Check {
    let start = Instant::now();
    let n = 60;
    let (fg, bg) = ([0.85, 0.2, 0.1], [0.1, 0.3, 0.8]);
    let alpha = |x: usize, y: usize| {
        let t = ((x as f64 - 12.0) / 36.0 + 0.05 * (y as f64 / 10.0).sin()).clamp(0.0, 1.0);
        1.0 - t * t * (3.0 - 2.0 * t)
    };
    let img = Image::from_fn(n, n, |x, y| {
        let a = alpha(x, y);
        [0, 1, 2].map(|c| a * fg[c] + (1.0 - a) * bg[c])
    })
    .unwrap();
    // known only along the border, as foreground left of centre and background right
    let labels = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            let border = x < 2 || y < 2 || x >= n - 2 || y >= n - 2;
            match (border, alpha(x, y)) {
                (true, a) if a >= 1.0 => TrimapLabel::Foreground,
                (true, a) if a <= 0.0 => TrimapLabel::Background,
                _ => TrimapLabel::Unknown,
            }
        })
        .collect();
    let trimap = Trimap::new(n, n, labels).unwrap();
    let cfg = MattingConfig::default();
    let lap = build_laplacian(&img, &cfg).map_err(|e| e.to_string())?;
    let solver = JacobiCg {
        tol: 1e-6,
        max_iters: 2000,
    };
    let sol = solve_alpha_raw(&lap, &trimap, &cfg, &solver).map_err(|e| e.to_string())?;
    let matte = sol.matte(n, n).map_err(|e| e.to_string())?;
    let mae = (0..n * n).map(|i| (matte.alpha()[i] - alpha(i % n, i / n)).abs()).sum::<f64>() / (n * n) as f64;
    let secs = start.elapsed().as_secs_f64();
    let r = &sol.report;
    ensure(r.converged && r.relative_residual <= 1e-6, format!("residual {:e}", r.relative_residual))?;
    ensure(r.iterations < 2000, format!("{} iterations", r.iterations))?;
    ensure(mae < 0.02, format!("MAE {mae:.4}"))?;
    ensure(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(format!("MAE {mae:.4}, {} iterations, residual {:.1e}, {secs:.2} s", r.iterations, r.relative_residual))
}

fn binarize_boundary() -> Check {
    let m = AlphaMatte::new(2, 1, vec![0.5, 0.4999]).unwrap();
    let b = binarize(&m);
    ensure(b.labels() == [true, false], format!("got {:?}", b.labels()))?;
    Ok("0.5 -> foreground, 0.4999 -> background".into())
}

// ---------------------------------------------------------------- selection

fn candidate_set(scores: &[Option<f64>]) -> CandidateSet {
    let lab = LabImage {
        width: 2,
        height: 1,
        pixels: vec![[10.0, 0.0, 0.0], [80.0, 0.0, 0.0]],
    };
    let pm = PatchMap::from_labels(&lab, &[0, 1]).unwrap();
    let labeling = FgLabeling::from_patch_labels(&pm, vec![false, true]).unwrap();
    CandidateSet {
        candidates: scores
            .iter()
            .enumerate()
            .map(|(i, s)| Candidate {
                factor: 2 * (i + 1),
                image: None,
                bbox: None,
                patch_count: 10,
                labeling: s.map(|_| labeling.clone()),
                score: s.unwrap_or(f64::NEG_INFINITY),
                skip_reason: s.is_none().then(|| "skipped".into()),
            })
            .collect(),
        selected_index: None,
    }
}

fn first_max(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = *s {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn selection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let scores: Vec<Option<f64>> = (0..5)
            .map(|_| rng.gen_bool(0.85).then(|| f64::from(rng.gen_range(-4i32..5))))
            .collect();
        let expected = first_max(&scores);
        let got = select(&candidate_set(&scores)).ok();
        ensure(got == expected, format!("case {case} {scores:?}: got {got:?}, want {expected:?}"))?;
        let (a, b) = (rng.gen_range(0.01..100.0), rng.gen_range(-1e3..1e3));
        let mapped: Vec<Option<f64>> = scores.iter().map(|s| s.map(|v| a * v + b)).collect();
        let got2 = select(&candidate_set(&mapped)).ok();
        ensure(got2 == got, format!("case {case}: affine map changed {got:?} to {got2:?}"))?;
    }
    let tie = select(&candidate_set(&[Some(1.0), Some(3.0), None, Some(3.0), Some(2.0)])).ok();
    ensure(tie == Some(1), format!("tie resolved to {tie:?}"))?;
    Ok("1000 cases exact argmax, affine invariant, ties to the finer factor".into())
}

// ---------------------------------------------------------------- multires

fn multires_trend() -> Check {
    let ms = MeanShiftConfig::default();
    let fg = FgConfig::default();
    let (mut ok, mut pairs) = (0, 0);
    for seed in 0..20 {
        let img = cluttered_texture(200, 100 + seed);
        let cs = generate_candidates(&img, &BoundingBox::new(50, 50, 100, 100), &DEFAULT_FACTORS, &ms, &fg)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        for w in cs.candidates.windows(2) {
            pairs += 1;
            ok += usize::from(w[1].patch_count <= w[0].patch_count);
        }
    }
    ensure(ok * 10 >= pairs * 9, format!("{ok}/{pairs} non-increasing pairs"))?;

    let cs = generate_candidates(&sparse_blocks(400, 44), &BoundingBox::new(90, 90, 220, 220), &DEFAULT_FACTORS, &ms, &fg)
        .map_err(|e| e.to_string())?;
    let summary: Vec<String> = cs
        .candidates
        .iter()
        .map(|c| if c.is_skipped() { format!("{}:-", c.patch_count) } else { c.patch_count.to_string() })
        .collect();
    for c in &cs.candidates {
        let below = c.patch_count < fg.min_patches;
        ensure(below == c.is_skipped(), format!("factor {} with {} patches", c.factor, c.patch_count))?;
    }
    ensure(cs.candidates.iter().any(Candidate::is_skipped), "no candidate was skipped")?;
    Ok(format!("{ok}/{pairs} non-increasing pairs; sparse image counts [{}]", summary.join(", ")))
}

// ---------------------------------------------------------------- end to end

fn mean_f(report: &EvalReport, s: Strategy, looseness: f64) -> f64 {
    report
        .aggregates
        .iter()
        .find(|a| a.strategy == s && a.looseness == looseness)
        .map_or(f64::NAN, |a| a.mean_f_measure)
}

fn end_to_end(report: &EvalReport, secs: f64) -> Check {
    let full = mean_f(report, Strategy::Full, 1.0);
    let pre = mean_f(report, Strategy::NoRefine, 1.0);
    let single = mean_f(report, Strategy::SingleResolution, 1.0);
    let detail = format!("mean F full {full:.4}, no-refine {pre:.4}, single-resolution {single:.4}; {secs:.1} s");
    ensure(full >= 0.95, format!("{detail}: full below 0.95"))?;
    ensure(secs < 300.0, format!("{detail}: too slow"))?;
    ensure(full >= pre, format!("{detail}: full < no-refine"))?;
    ensure(pre >= single, format!("{detail}: no-refine < single-resolution"))?;
    Ok(detail)
}

fn loose_box(report: &EvalReport) -> Check {
    let tight = mean_f(report, Strategy::Full, 1.0);
    let loose = mean_f(report, Strategy::Full, 1.6);
    let drop = tight - loose;
    ensure(drop < 0.05, format!("F {tight:.4} -> {loose:.4}"))?;
    Ok(format!("full F {tight:.4} tight, {loose:.4} at 1.6x (drop {drop:.4})"))
}

fn clutter_filter() -> Check {
    let ms = MeanShiftConfig::default();
    let b = BoundingBox::new(8, 8, 160, 120);
    let (a, c) = (cell_grid(22, 17, 8, 0), cell_grid(22, 17, 8, 1));
    let (na, nc) = (roi_patch_count(&a, &b, &ms).map_err(|e| e.to_string())?, roi_patch_count(&c, &b, &ms).map_err(|e| e.to_string())?);
    ensure(na == 300 && nc == 301, format!("counts {na}, {nc}"))?;
    ensure(!is_cluttered(&a, &b, &ms), "300 patches counted as cluttered")?;
    ensure(is_cluttered(&c, &b, &ms), "301 patches not counted as cluttered")?;
    Ok("300 patches -> not cluttered, 301 -> cluttered".into())
}

// ---------------------------------------------------------------- determinism

fn cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_matteforge"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn without_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("timings");
            m.remove("single_resolution_ms");
            m.values_mut().for_each(without_timings);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(without_timings),
        _ => {}
    }
}

fn determinism(corpus: &Path, tmp: &Path) -> Check {
    let image = corpus.join("images").join("disk_000.png");
    let manifest = corpus.join("manifest.json");
    let runs: Vec<_> = (0..2).map(|i| tmp.join(format!("run{i}"))).collect();
    for run in &runs {
        let seg = run.join("segment");
        cli(&["segment", "--input", image.to_str().unwrap(), "--bbox", &bbox_arg(corpus), "--out", seg.to_str().unwrap(), "--dump-intermediates"])?;
        let bench = run.join("bench");
        cli(&["bench", "--manifest", manifest.to_str().unwrap(), "--out", bench.to_str().unwrap(), "--write-masks", "--workers", "3"])?;
    }
    let (a, b) = (files(&runs[0]), files(&runs[1]));
    ensure(a == b, "runs wrote different file sets")?;
    let mut compared = 0;
    for rel in &a {
        if rel.file_name().is_some_and(|n| n == "timings.json") {
            continue;
        }
        let (x, y) = (std::fs::read(runs[0].join(rel)).unwrap(), std::fs::read(runs[1].join(rel)).unwrap());
        let same = if rel.file_name().is_some_and(|n| n == "report.json") {
            let mut vx: serde_json::Value = serde_json::from_slice(&x).unwrap();
            let mut vy: serde_json::Value = serde_json::from_slice(&y).unwrap();
            without_timings(&mut vx);
            without_timings(&mut vy);
            vx == vy
        } else {
            x == y
        };
        ensure(same, format!("{} differs", rel.display()))?;
        compared += 1;
    }
    Ok(format!("{compared} files byte-identical across two runs"))
}

fn bbox_arg(corpus: &Path) -> String {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(corpus.join("manifest.json")).unwrap()).unwrap();
    let b = &m["entries"][0]["bbox"];
    if b.is_null() {
        let gt = matteforge::io::load_mask(corpus.join("ground_truth").join("disk_000.png")).unwrap();
        let b = gt.foreground_bounds().unwrap();
        format!("{},{},{},{}", b.x, b.y, b.w, b.h)
    } else {
        format!("{},{},{},{}", b["x"], b["y"], b["w"], b["h"])
    }
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let corpus = tmp.path().join("corpus");
    let mut results: Vec<(&str, Check)> = Vec::new();

    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Check| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match &r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => println!("FAIL  {name}: {d}"),
        }
        results.push((name, r));
    };

    run("laplacian-correctness", &mut laplacian_correctness);
    run("matting-recovery", &mut matting_recovery);
    run("binarize-boundary", &mut binarize_boundary);
    run("selection", &mut selection);
    run("multires-trend", &mut multires_trend);

    let bench = (|| -> Result<(EvalReport, f64), String> {
        let manifest = write_disk_corpus(&corpus, 10, 200, 0).map_err(|e| e.to_string())?;
        let cfg = BenchConfig {
            looseness: vec![1.0, 1.6],
            ..BenchConfig::default()
        };
        let start = Instant::now();
        let report = run_benchmark(&manifest.entries, &Strategy::ALL, &cfg).map_err(|e| e.to_string())?;
        Ok((report, start.elapsed().as_secs_f64()))
    })();
    match &bench {
        Ok((report, secs)) => {
            run("end-to-end-synthetic", &mut || end_to_end(report, *secs));
            run("loose-box-robustness", &mut || loose_box(report));
        }
        Err(e) => {
            run("end-to-end-synthetic", &mut || Err(e.clone()));
            run("loose-box-robustness", &mut || Err(e.clone()));
        }
    }
    run("clutter-filter", &mut clutter_filter);
    run("determinism", &mut || determinism(&corpus, tmp.path()));

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
