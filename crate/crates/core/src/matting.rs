//! Closed-form matting.
//!
//! Within every `(2r+1) x (2r+1)` window `w_k` alpha is modelled as an affine
//! function of colour, `alpha_i = a_k . I_i + b_k`, with a ridge penalty
//! `eps * |a_k|^2`. Eliminating `(a_k, b_k)` leaves the quadratic form
//! `alpha^T L alpha` with
//!
//! ```text
//! L_ij = sum_{k : i,j in w_k} ( delta_ij - (1 + (I_i - mu_k)^T (S_k + eps/m Id)^-1 (I_j - mu_k)) / m )
//! ```
//!
//! where `mu_k` and `S_k` are the window's colour mean and population
//! covariance and `m` its pixel count. Known trimap pixels are imposed as a
//! soft penalty: `(L + lambda D) alpha = lambda d`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Image};
use crate::solver::{DiagonalShift, JacobiCg, SolveReport, SymmetricSolver};
use crate::sparse::CsrMatrix;
use crate::trimap::{Trimap, TrimapLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MattingConfig {
    /// Window half-width: 1 gives 3x3 windows, 2 gives 5x5.
    pub window_radius: usize,
    pub epsilon: f64,
    /// Weight of the known-pixel penalty.
    pub lambda: f64,
    pub solver_tol: f64,
    pub solver_max_iters: usize,
}

impl Default for MattingConfig {
    fn default() -> Self {
        Self {
            window_radius: 1,
            epsilon: 1e-5,
            lambda: 100.0,
            solver_tol: 1e-6,
            solver_max_iters: 2000,
        }
    }
}

impl MattingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius == 0 || self.epsilon <= 0.0 || self.lambda <= 0.0 || self.solver_tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("matting parameters out of range: {self:?}")));
        }
        Ok(())
    }

    fn window_pixels(&self) -> usize {
        (2 * self.window_radius + 1).pow(2)
    }
}

/// The matting Laplacian of one image, one row per pixel in scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct MattingLaplacian {
    pub width: usize,
    pub height: usize,
    pub matrix: CsrMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
}

impl AlphaMatte {
    /// Values are clamped into `[0, 1]`.
    pub fn new(width: usize, height: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != width * height {
            return Err(Error::DimensionMismatch(alpha.len(), 1, width * height, 1));
        }
        Ok(Self {
            width,
            height,
            alpha: alpha.into_iter().map(|a| a.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.width + x]
    }

    /// 8-bit export: `round(alpha * 255)`.
    pub fn to_gray(&self) -> Vec<u8> {
        self.alpha.iter().map(|a| (a * 255.0).round() as u8).collect()
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            alpha: mask.labels().iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
        }
    }
}

// Per-window statistics: colour mean and (S + eps/m Id)^-1.
#[derive(Clone, Copy)]
struct WindowStats {
    mean: [f64; 3],
    inv: [[f64; 3]; 3],
}

fn invert_sym3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv_det = 1.0 / det;
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c12 = m[0][2] * m[1][0] - m[0][0] * m[1][2];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [c00 * inv_det, c01 * inv_det, c02 * inv_det],
        [c01 * inv_det, c11 * inv_det, c12 * inv_det],
        [c02 * inv_det, c12 * inv_det, c22 * inv_det],
    ]
}

fn window_stats(img: &Image, cx: usize, cy: usize, r: usize, eps: f64) -> WindowStats {
    let m = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut mean = [0.0; 3];
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let p = img.get(x, y);
            for c in 0..3 {
                mean[c] += p[c];
            }
        }
    }
    mean = mean.map(|s| s / m);
    let mut cov = [[0.0; 3]; 3];
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let p = img.get(x, y);
            let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
            for a in 0..3 {
                for b in 0..3 {
                    cov[a][b] += d[a] * d[b];
                }
            }
        }
    }
    for (a, row) in cov.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v /= m;
            if a == b {
                *v += eps / m;
            }
        }
    }
    WindowStats {
        mean,
        inv: invert_sym3(cov),
    }
}

/// Assembles the matting Laplacian of `img`.
pub fn build_laplacian(img: &Image, cfg: &MattingConfig) -> Result<MattingLaplacian> {
    cfg.validate()?;
    let r = cfg.window_radius;
    let side = 2 * r + 1;
    img.require_min(side, side)?;
    let (w, h) = (img.width(), img.height());
    let m = cfg.window_pixels() as f64;

    // window k is indexed by its centre; only fully interior centres exist
    let cw = w - 2 * r;
    let ch = h - 2 * r;
    let windows: Vec<WindowStats> = (0..cw * ch)
        .into_par_iter()
        .map(|k| window_stats(img, k % cw + r, k / cw + r, r, cfg.epsilon))
        .collect();

    let reach = 2 * r as isize;
    let rows: Vec<Vec<(usize, f64)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let mut row = Vec::with_capacity((2 * reach as usize + 1).pow(2));
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (jx, jy) = (x + dx, y + dy);
                    if jx < 0 || jy < 0 || jx >= w as isize || jy >= h as isize {
                        continue;
                    }
                    let j = jy as usize * w + jx as usize;
                    // canonical (lo, hi) order keeps L_ij and L_ji bitwise equal
                    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                    let plo = img.pixels()[lo];
                    let phi = img.pixels()[hi];
                    // window centres covering both pixels, clamped to the interior
                    let cx0 = (x.max(jx) - r as isize).max(r as isize);
                    let cx1 = (x.min(jx) + r as isize).min((w - 1 - r) as isize);
                    let cy0 = (y.max(jy) - r as isize).max(r as isize);
                    let cy1 = (y.min(jy) + r as isize).min((h - 1 - r) as isize);
                    if cx0 > cx1 || cy0 > cy1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for cy in cy0..=cy1 {
                        for cx in cx0..=cx1 {
                            let k = (cy as usize - r) * cw + (cx as usize - r);
                            let s = &windows[k];
                            let a = [plo[0] - s.mean[0], plo[1] - s.mean[1], plo[2] - s.mean[2]];
                            let b = [phi[0] - s.mean[0], phi[1] - s.mean[1], phi[2] - s.mean[2]];
                            let mut q = 0.0;
                            for u in 0..3 {
                                let va = s.inv[u][0] * a[0] + s.inv[u][1] * a[1] + s.inv[u][2] * a[2];
                                q += va * b[u];
                            }
                            let delta = if i == j { 1.0 } else { 0.0 };
                            acc += delta - (1.0 + q) / m;
                        }
                    }
                    row.push((j, acc));
                }
            }
            row
        })
        .collect();

    Ok(MattingLaplacian {
        width: w,
        height: h,
        matrix: CsrMatrix::from_rows(rows),
    })
}

/// Alpha before clamping, with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub raw: Vec<f64>,
    pub report: SolveReport,
}

impl AlphaSolution {
    pub fn matte(&self, width: usize, height: usize) -> Result<AlphaMatte> {
        AlphaMatte::new(width, height, self.raw.clone())
    }
}

/// Penalty weights and targets for the known pixels of `t`.
pub fn constraint_terms(t: &Trimap, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    t.labels()
        .iter()
        .map(|l| match l {
            TrimapLabel::Foreground => (lambda, lambda),
            TrimapLabel::Background => (lambda, 0.0),
            TrimapLabel::Unknown => (0.0, 0.0),
        })
        .unzip()
}

/// Solves `(L + lambda D) alpha = lambda d`, returning the unclamped alpha.
pub fn solve_alpha_raw(
    lap: &MattingLaplacian,
    t: &Trimap,
    cfg: &MattingConfig,
    solver: &dyn SymmetricSolver,
) -> Result<AlphaSolution> {
    cfg.validate()?;
    if (t.width(), t.height()) != (lap.width, lap.height) {
        return Err(Error::DimensionMismatch(t.width(), t.height(), lap.width, lap.height));
    }
    let known_value = |l: &TrimapLabel| match l {
        TrimapLabel::Foreground => 1.0,
        _ => 0.0,
    };
    let fg = t.count(TrimapLabel::Foreground);
    let bg = t.count(TrimapLabel::Background);
    let unknown = t.count(TrimapLabel::Unknown);
    let done = |raw: Vec<f64>| AlphaSolution {
        raw,
        report: SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        },
    };
    // nothing to solve: constant mattes, or every pixel already labelled
    if fg == 0 || bg == 0 {
        let v = if fg > 0 { 1.0 } else { 0.0 };
        return Ok(done(vec![v; t.labels().len()]));
    }
    if unknown == 0 {
        return Ok(done(t.labels().iter().map(known_value).collect()));
    }

    let (shift, rhs) = constraint_terms(t, cfg.lambda);
    let op = DiagonalShift {
        matrix: &lap.matrix,
        shift: &shift,
    };
    let mut x: Vec<f64> = t
        .labels()
        .iter()
        .map(|l| match l {
            TrimapLabel::Unknown => 0.5,
            other => known_value(other),
        })
        .collect();
    let report = solver.solve(&op, &rhs, &mut x);
    if !report.converged {
        return Err(Error::SolverDidNotConverge {
            iterations: report.iterations,
            residual: report.relative_residual,
        });
    }
    Ok(AlphaSolution { raw: x, report })
}

/// Alpha matte for trimap `t` using the Jacobi-preconditioned CG solver.
pub fn solve_alpha(lap: &MattingLaplacian, t: &Trimap, cfg: &MattingConfig) -> Result<AlphaMatte> {
    let solver = JacobiCg {
        tol: cfg.solver_tol,
        max_iters: cfg.solver_max_iters,
    };
    solve_alpha_raw(lap, t, cfg, &solver)?.matte(lap.width, lap.height)
}

/// `alpha >= 0.5` is foreground.
pub fn binarize(m: &AlphaMatte) -> BinaryMask {
    BinaryMask::new(m.width, m.height, m.alpha.iter().map(|&a| a >= 0.5).collect())
        .expect("matte dimensions are consistent")
}

/// Matting energy `alpha^T L alpha + lambda |D^(1/2) (alpha - d)|^2`.
pub fn matting_energy(lap: &MattingLaplacian, t: &Trimap, lambda: f64, alpha: &[f64]) -> f64 {
    let (shift, rhs) = constraint_terms(t, lambda);
    let data: f64 = alpha
        .iter()
        .zip(shift.iter().zip(&rhs))
        .filter(|(_, (&s, _))| s > 0.0)
        .map(|(&a, (&s, &r))| s * (a - r / s).powi(2))
        .sum();
    lap.matrix.quadratic_form(alpha) + data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_entries() {
        let img = Image::filled(3, 3, [0.3, 0.6, 0.2]).unwrap();
        let lap = build_laplacian(&img, &MattingConfig::default()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expect = if i == j { 1.0 - 1.0 / 9.0 } else { -1.0 / 9.0 };
                assert!((lap.matrix.get(i, j) - expect).abs() < 1e-12);
            }
        }
        assert!(lap.matrix.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn too_small_for_window() {
        let img = Image::filled(2, 5, [0.0; 3]).unwrap();
        assert!(matches!(
            build_laplacian(&img, &MattingConfig::default()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn binarize_threshold_inclusive() {
        let m = AlphaMatte::new(4, 1, vec![0.5, 0.49, 0.4999, 1.0]).unwrap();
        assert_eq!(binarize(&m).labels(), &[true, false, false, true]);
        let ones = AlphaMatte::new(3, 3, vec![1.0; 9]).unwrap();
        assert_eq!(binarize(&ones).foreground_count(), 9);
    }

    #[test]
    fn fully_known_trimap_is_exact() {
        let img = Image::from_fn(8, 8, |x, y| [x as f64 / 8.0, y as f64 / 8.0, 0.5]).unwrap();
        let lap = build_laplacian(&img, &MattingConfig::default()).unwrap();
        let labels = (0..64)
            .map(|i| if i % 8 < 4 { TrimapLabel::Foreground } else { TrimapLabel::Background })
            .collect();
        let t = Trimap::new(8, 8, labels).unwrap();
        let m = solve_alpha(&lap, &t, &MattingConfig::default()).unwrap();
        for i in 0..64 {
            let expect = if i % 8 < 4 { 1.0 } else { 0.0 };
            assert!((m.alpha()[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn one_sided_trimap_is_constant() {
        let img = Image::filled(5, 5, [0.5; 3]).unwrap();
        let lap = build_laplacian(&img, &MattingConfig::default()).unwrap();
        let labels = (0..25)
            .map(|i| if i < 5 { TrimapLabel::Foreground } else { TrimapLabel::Unknown })
            .collect();
        let t = Trimap::new(5, 5, labels).unwrap();
        let m = solve_alpha(&lap, &t, &MattingConfig::default()).unwrap();
        assert!(m.alpha().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn non_convergence_is_reported() {
        let img = Image::from_fn(20, 20, |x, y| [(x * 7 % 11) as f64 / 11.0, (y * 5 % 13) as f64 / 13.0, 0.4]).unwrap();
        let cfg = MattingConfig {
            solver_max_iters: 1,
            solver_tol: 1e-12,
            ..Default::default()
        };
        let lap = build_laplacian(&img, &cfg).unwrap();
        let labels = (0..400)
            .map(|i| match i % 20 {
                0 => TrimapLabel::Foreground,
                19 => TrimapLabel::Background,
                _ => TrimapLabel::Unknown,
            })
            .collect();
        let t = Trimap::new(20, 20, labels).unwrap();
        assert!(matches!(
            solve_alpha(&lap, &t, &cfg),
            Err(Error::SolverDidNotConverge { iterations: 1, .. })
        ));
    }

    #[test]
    fn gray_export_rounds() {
        let m = AlphaMatte::new(3, 1, vec![0.0, 0.5, 1.2]).unwrap();
        assert_eq!(m.to_gray(), vec![0, 128, 255]);
    }
}
