//! Dense complex linear algebra for the block least-squares solves.
//!
//! Products are parallel over output rows; each entry is accumulated in a
//! fixed sequential order, so results do not depend on thread scheduling.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Default pivot threshold, relative to the largest diagonal entry.
pub const DEFAULT_PIVOT_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error(
        "matrix is not positive definite: pivot {pivot} is {value:e} (threshold {threshold:e})"
    )]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        threshold: f64,
    },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(
        rows: usize,
        cols: usize,
        entries: Vec<Complex64>,
    ) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m.entries[i * values.len() + i] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let entries = (0..self.rows)
            .flat_map(|r| {
                let row = self.row(r);
                columns.iter().map(move |&c| row[c])
            })
            .collect();
        Self {
            rows: self.rows,
            cols: columns.len(),
            entries,
        }
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        let mut entries = vec![ZERO; self.rows * n];
        entries
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, out)| {
                for (k, a) in self.row(i).iter().enumerate() {
                    if *a == ZERO {
                        continue;
                    }
                    for (o, b) in out.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            });
        Ok(Self {
            rows: self.rows,
            cols: n,
            entries,
        })
    }

    /// `self^H · self`, the Gram matrix of the columns.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut entries = vec![ZERO; n * n];
        entries
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, out)| {
                for r in 0..self.rows {
                    let row = self.row(r);
                    let a = row[i].conj();
                    for (o, b) in out.iter_mut().zip(row) {
                        *o += a * b;
                    }
                }
            });
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// `self^H · v` without forming the conjugate transpose.
    pub fn hermitian_mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if v.len() != self.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "({}x{})^H times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![ZERO; self.cols];
        for (r, x) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * x;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} minus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x * y)
}

/// Lower-triangular Cholesky factor `L` of a Hermitian positive definite
/// matrix, `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<Complex64>,
}

impl Cholesky {
    /// Factorizes `a + ridge·I`, reading only the lower triangle.
    ///
    /// A pivot at or below `pivot_tolerance` times the largest diagonal entry
    /// is reported as [`LinalgError::NotPositiveDefinite`].
    pub fn factor(
        a: &ComplexMatrix,
        pivot_tolerance: f64,
        ridge: f64,
    ) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let max_diag = (0..n).map(|i| a.get(i, i).re + ridge).fold(0.0, f64::max);
        let threshold = pivot_tolerance * max_diag;
        let mut l = vec![ZERO; n * n];
        for j in 0..n {
            let mut d = a.get(j, j).re + ridge;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > threshold) {
                return Err(LinalgError::NotPositiveDefinite {
                    pivot: j,
                    value: d,
                    threshold,
                });
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "length-{} right-hand side for a {n}x{n} system",
                b.len()
            )));
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i].conj() * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        Ok(y)
    }

    /// Ratio of the largest to the smallest squared diagonal of the factor,
    /// a cheap lower bound on the condition number of the factored matrix.
    pub fn condition_estimate(&self) -> f64 {
        let diag = (0..self.n).map(|i| self.lower[i * self.n + i].re.powi(2));
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
        hi / lo
    }
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn solve_hermitian_pd(
    a: &ComplexMatrix,
    b: &[Complex64],
) -> Result<Vec<Complex64>, LinalgError> {
    let asym = (0..a.rows.min(a.cols))
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (a.get(i, j) - a.get(j, i).conj()).norm())
        .fold(0.0, f64::max);
    if a.rows == a.cols && asym > 1e-10 * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian(asym));
    }
    Cholesky::factor(a, DEFAULT_PIVOT_TOLERANCE, 0.0)?.solve(b)
}

/// Euclidean norm, scaled to avoid overflow.
pub fn norm2(v: &[Complex64]) -> f64 {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|z| (z / scale).norm_sqr()).sum::<f64>().sqrt()
}
