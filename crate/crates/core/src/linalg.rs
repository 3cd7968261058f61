//! Symmetric tridiagonal systems. Every matrix assembled on a 1D P1 mesh is
//! tridiagonal, so nothing heavier is needed.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A tridiagonal matrix stored by diagonals. `lower[i]` couples rows
/// `i + 1` and `i`; `upper[i]` couples rows `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            lower: vec![0.0; n.saturating_sub(1)],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds `value` at `(i, j)`; `|i - j|` must be at most one.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            self.diag[i] += value;
        } else if j == i + 1 {
            self.upper[i] += value;
        } else if i == j + 1 {
            self.lower[j] += value;
        } else {
            panic!("entry ({i}, {j}) is outside the tridiagonal band");
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Tridiagonal) {
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += s * b;
        }
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += s * b;
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += s * b;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|v| s * v).collect(),
            lower: self.lower.iter().map(|v| s * v).collect(),
            upper: self.upper.iter().map(|v| s * v).collect(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Thomas algorithm without pivoting. Adequate for the diagonally
    /// dominant and symmetric positive definite systems assembled here.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        check_pivot(0, pivot, self.diag[0])?;
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            check_pivot(i, pivot, self.diag[i])?;
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot;
        }
        let mut x = DVector::zeros(n);
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        Ok(x)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .all(|(l, u)| (l - u).abs() <= tol * (1.0 + l.abs().max(u.abs())))
    }
}

fn check_pivot(row: usize, pivot: f64, scale: f64) -> Result<()> {
    if !pivot.is_finite() || pivot.abs() <= 1e-300 || pivot.abs() <= 1e-14 * scale.abs() {
        return Err(Error::SingularSystem { row, pivot });
    }
    Ok(())
}

/// `L D L^T` factorization of a symmetric positive definite tridiagonal
/// matrix. Construction fails if the matrix is not positive definite.
#[derive(Clone, Debug)]
pub struct TridiagonalCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagonalCholesky {
    pub fn new(a: &Tridiagonal) -> Result<Self> {
        let n = a.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut di = a.diag[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(di > 0.0) || di <= 1e-14 * a.diag[i].abs() {
                return Err(Error::SingularSystem { row: i, pivot: di });
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = a.lower[i] / di;
            }
        }
        Ok(Self { d, l })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.d.len();
        let mut y = rhs.clone();
        for i in 1..n {
            y[i] -= self.l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.l[i] * y[i + 1];
        }
        y
    }
}
