//! Small dense vector and matrix helpers.
//!
//! Everything here works on plain `f64` slices so the core stays free of a
//! linear-algebra dependency.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Inner product. Panics in debug builds when lengths differ.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// Squared Euclidean distance.
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero `n x n` matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Diagonal matrix.
    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *d;
        }
        m
    }

    /// Builds a matrix from row-major data of length `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    /// `B B^T / scale` for a `n x cols` row-major factor `b`.
    pub fn gram(n: usize, cols: usize, b: &[f64], scale: f64) -> Self {
        debug_assert_eq!(b.len(), n * cols);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = dot(&b[i * cols..(i + 1) * cols], &b[j * cols..(j + 1) * cols]) / scale;
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Side length.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Matrix-vector product written into `out`.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// Maximum absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Entrywise mean of equally sized matrices.
    pub fn mean(mats: &[Matrix]) -> Result<Self> {
        let first = mats.first().ok_or(Error::EmptyInput)?;
        let mut acc = Self::zeros(first.n);
        for m in mats {
            if m.n != first.n {
                return Err(Error::DimensionMismatch {
                    expected: first.n,
                    got: m.n,
                });
            }
            for (a, b) in acc.data.iter_mut().zip(&m.data) {
                *a += b;
            }
        }
        let count = mats.len() as f64;
        acc.data.iter_mut().for_each(|a| *a /= count);
        Ok(acc)
    }
}

/// Numerical rank of the row space of `rows` (each of equal length), by
/// Gaussian elimination with partial pivoting. Pivots below
/// `tol * max|entry|` count as zero.
pub fn rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let Some(first) = rows.first() else {
        return 0;
    };
    let cols = first.len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let threshold = tol * scale;
    let mut rank = 0;
    for col in 0..cols {
        if rank == a.len() {
            break;
        }
        let (pivot, best) = (rank..a.len())
            .map(|r| (r, a[r][col].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= threshold {
            continue;
        }
        a.swap(rank, pivot);
        let pivot_row = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            let factor = row[col] / pivot_row[col];
            if factor != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *x -= factor * p;
                }
            }
        }
        rank += 1;
    }
    rank
}
