//! Dense row-major matrix and the small set of linear-algebra routines the
//! estimators need (Cholesky solve for ridge systems).

use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};

/// Dense row-major f64 matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds from a flat row-major buffer. Errors if the length is not
    /// `n_rows * n_cols`.
    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(CdeError::ShapeMismatch {
                context: "Matrix::from_vec",
                expected: format!("{} values", n_rows * n_cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds from row vectors, which must all have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(CdeError::ShapeMismatch {
                    context: "Matrix::from_rows",
                    expected: format!("row of length {n_cols}"),
                    got: format!("length {} at row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Selects the given rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.n_cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// Column mean over all rows.
    pub fn col_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_cols];
        for r in self.rows() {
            for (j, &v) in r.iter().enumerate() {
                m[j] += v;
            }
        }
        let n = self.n_rows.max(1) as f64;
        for v in &mut m {
            *v /= n;
        }
        m
    }

    /// Population column standard deviations (divides by N).
    pub fn col_stds(&self) -> Vec<f64> {
        let means = self.col_means();
        let mut s = vec![0.0; self.n_cols];
        for r in self.rows() {
            for (j, &v) in r.iter().enumerate() {
                let d = v - means[j];
                s[j] += d * d;
            }
        }
        let n = self.n_rows.max(1) as f64;
        for v in &mut s {
            *v = (*v / n).sqrt();
        }
        s
    }
}

/// Solves (A) x = b for symmetric positive-definite A via Cholesky,
/// overwriting nothing. Errors with an ill-conditioned diagnosis when a
/// pivot is not strictly positive.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n_rows();
    if a.n_cols() != n || b.len() != n {
        return Err(CdeError::ShapeMismatch {
            context: "cholesky_solve",
            expected: format!("square system of size {n}"),
            got: format!("{}x{} with rhs {}", a.n_rows(), a.n_cols(), b.len()),
        });
    }
    // Lower-triangular factor, row-major.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(CdeError::IllConditioned {
                        detail: format!("non-positive Cholesky pivot {sum:e} at index {i}"),
                    });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward substitution L z = b.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * z[k];
        }
        z[i] = sum / l[i * n + i];
    }
    // Back substitution L^T x = z.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}
