//! Iterative solvers for symmetric positive (semi-)definite systems.

use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;

/// A symmetric linear operator.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

/// `A + diag(shift)`.
pub struct DiagonalShift<'a> {
    pub matrix: &'a CsrMatrix,
    pub shift: &'a [f64],
}

impl LinearOperator for DiagonalShift<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec(x, y);
        for ((yi, xi), si) in y.iter_mut().zip(x).zip(self.shift) {
            *yi += si * xi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.matrix
            .diagonal()
            .into_iter()
            .zip(self.shift)
            .map(|(d, s)| d + s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

pub trait SymmetricSolver {
    /// Solves `A x = b` in place, starting from the contents of `x`.
    fn solve(&self, op: &dyn LinearOperator, b: &[f64], x: &mut [f64]) -> SolveReport;
}

/// Conjugate gradient with a Jacobi (diagonal) preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct JacobiCg {
    pub tol: f64,
    pub max_iters: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SymmetricSolver for JacobiCg {
    fn solve(&self, op: &dyn LinearOperator, b: &[f64], x: &mut [f64]) -> SolveReport {
        let n = op.dim();
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            };
        }
        let inv_diag: Vec<f64> = op
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();

        let mut r = vec![0.0; n];
        op.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut residual = dot(&r, &r).sqrt() / b_norm;
        let mut iterations = 0;

        while residual > self.tol && iterations < self.max_iters {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            iterations += 1;
            residual = dot(&r, &r).sqrt() / b_norm;
            if residual <= self.tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }

        // report the true residual, not the recurrence
        op.apply(x, &mut ap);
        let true_res = ap
            .iter()
            .zip(b)
            .map(|(a, bi)| (bi - a).powi(2))
            .sum::<f64>()
            .sqrt()
            / b_norm;
        SolveReport {
            iterations,
            relative_residual: true_res,
            converged: true_res <= self.tol,
        }
    }
}
