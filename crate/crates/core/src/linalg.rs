//! Thin helpers over faer for the dense `Vec<f64>` interfaces used across
//! the crate.

use faer::linalg::solvers::{Llt, Solve};
use faer::linalg::triangular_solve;
use faer::{ColRef, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

pub(crate) fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `x^T A y`.
pub(crate) fn bilinear(a: &Mat<f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest `|A_ij - A_ji|` relative to the largest entry.
pub fn asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            scale = scale.max(a[(i, j)].abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &Mat<f64>) -> Result<f64> {
    let ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("symmetric eigensolver: {e:?}")))?;
    Ok(ev.first().copied().unwrap_or(f64::NAN))
}

/// Cholesky factor of an SPD matrix with the solves the crate needs.
#[derive(Debug)]
pub struct Cholesky {
    llt: Llt<f64>,
}

impl Cholesky {
    pub fn new(a: &Mat<f64>, what: &str) -> Result<Self> {
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::Solver(format!("{what} is not positive definite: {e:?}")))?;
        Ok(Self { llt })
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn factor(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.llt.solve(ColRef::from_slice(b));
        x.iter().copied().collect()
    }

    /// `L^{-1} B` for a dense right-hand side.
    pub fn lower_solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        let mut x = b.clone();
        triangular_solve::solve_lower_triangular_in_place(self.llt.L(), x.as_mut(), Par::Seq);
        x
    }

    /// `L^T x` for a vector.
    pub fn upper_mul(&self, x: &[f64]) -> Vec<f64> {
        let y = self.llt.L().transpose() * ColRef::from_slice(x);
        y.iter().copied().collect()
    }

    /// `L^{-T} x` for a vector.
    pub fn upper_solve(&self, x: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        triangular_solve::solve_upper_triangular_in_place(self.llt.L().transpose(), m.as_mut(), Par::Seq);
        (0..x.len()).map(|i| m[(i, 0)]).collect()
    }
}
