//! Positive-definite determinant and inverse machinery.
//!
//! Every cluster keeps the inverse of its Gram matrix together with the log
//! determinant. Adding a point uses the partitioned-inverse identity
//! (Schur complement of the new point); removing a point uses its exact
//! algebraic counterpart. All determinant arithmetic is in log space.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Smallest Schur complement treated as numerically positive.
pub const SCHUR_FLOOR: f64 = 1e-12;

/// Diagonal jitter, relative to the mean diagonal, used for a single retry
/// when a Cholesky rebuild fails.
pub const REBUILD_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("Schur complement {w:e} is at or below the degeneracy floor")]
    NumericalDegeneracy { w: f64 },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("shape mismatch: {0}")]
    Shape(&'static str),
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * alpha).collect(),
        }
    }

    /// Principal submatrix on the given ordered index set.
    pub fn select(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }

    fn mean_diagonal(&self) -> f64 {
        if self.rows == 0 {
            return 0.0;
        }
        (0..self.rows).map(|i| self[(i, i)]).sum::<f64>() / self.rows as f64
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("Matrix")
            .field("shape", &(self.rows, self.cols))
            .field("rows", &rows)
            .finish()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric matrix. Only the lower
/// triangle of `m` is read.
pub fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::Shape("cholesky needs a square matrix"));
    }
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        // `!(d > 0)` also catches NaN.
        if !(d > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Log-determinant and inverse of a symmetric positive-definite matrix.
pub fn cholesky_logdet(m: &Matrix) -> Result<(f64, Matrix), LinalgError> {
    let l = cholesky(m)?;
    let n = l.rows;
    let log_det = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();

    // L^{-1} by forward substitution, then M^{-1} = L^{-T} L^{-1}.
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s / l[(i, i)];
        }
    }
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[(k, i)] * linv[(k, j)];
            }
            inv[(i, j)] = s;
            inv[(j, i)] = s;
        }
    }
    Ok((log_det, inv))
}

/// Determinant of a general square matrix by partial-pivoting LU.
pub fn lu_det(m: &Matrix) -> Result<f64, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::Shape("determinant needs a square matrix"));
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .unwrap_or(col);
        if a[(pivot, col)] == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for j in 0..n {
                a.data.swap(pivot * n + j, col * n + j);
            }
            det = -det;
        }
        let p = a[(col, col)];
        det *= p;
        for i in col + 1..n {
            let f = a[(i, col)] / p;
            if f != 0.0 {
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }
    Ok(det)
}

/// Determinant of the block matrix `[[A, Cᵀ], [C, B]]` through the Schur
/// complement of `A`: `det(A) · det(B − C A⁻¹ Cᵀ)`.
///
/// `A` is `p×p` positive definite, `B` is `q×q` and `C` is `q×p`.
pub fn block_det(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<f64, LinalgError> {
    if !b.is_square() || c.rows != b.rows || c.cols != a.rows {
        return Err(LinalgError::Shape("block_det expects A p×p, B q×q, C q×p"));
    }
    let (log_det_a, a_inv) = cholesky_logdet(a)?;
    let correction = c.matmul(&a_inv).matmul(&c.transpose());
    let schur = Matrix::from_fn(b.rows, b.cols, |i, j| b[(i, j)] - correction[(i, j)]);
    Ok(log_det_a.exp() * lu_det(&schur)?)
}

/// Cached inverse and log-determinant of a positive-definite Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PdCache {
    inverse: Matrix,
    log_det: f64,
}

impl Default for PdCache {
    fn default() -> Self {
        Self::empty()
    }
}

impl PdCache {
    pub fn empty() -> Self {
        Self {
            inverse: Matrix::zeros(0, 0),
            log_det: 0.0,
        }
    }

    /// Builds the cache directly from a Gram matrix.
    pub fn from_gram(gram: &Matrix) -> Result<Self, LinalgError> {
        let (log_det, inverse) = cholesky_logdet(gram)?;
        Ok(Self { inverse, log_det })
    }

    /// Like [`PdCache::from_gram`], but retries once with a small diagonal
    /// jitter when the factorization fails. Returns whether jitter was used.
    pub fn rebuild(gram: &Matrix) -> Result<(Self, bool), LinalgError> {
        match Self::from_gram(gram) {
            Ok(cache) => Ok((cache, false)),
            Err(LinalgError::NotPositiveDefinite { .. }) => {
                let jitter = REBUILD_JITTER * gram.mean_diagonal().abs().max(f64::MIN_POSITIVE);
                let mut jittered = gram.clone();
                for i in 0..jittered.rows {
                    jittered[(i, i)] += jitter;
                }
                Ok((Self::from_gram(&jittered)?, true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn size(&self) -> usize {
        self.inverse.rows
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `K⁻¹ k` for a cross-covariance vector `k`.
    pub fn project(&self, cross: &[f64]) -> Vec<f64> {
        self.inverse.mul_vec(cross)
    }

    /// Schur complement `k(x,x) − kᵀ K⁻¹ k` of a candidate point, unclamped.
    pub fn schur_complement(&self, cross: &[f64], self_k: f64) -> f64 {
        self_k - dot(cross, &self.project(cross))
    }
}

/// Cache for `A ∪ {x}` given the cache for `A`, the cross-covariances
/// `k(x, A)` and `k(x, x)`. The new point is appended last.
pub fn inverse_add_point(
    cache: &PdCache,
    cross: &[f64],
    self_k: f64,
) -> Result<PdCache, LinalgError> {
    if cross.len() != cache.size() {
        return Err(LinalgError::Shape(
            "cross-covariance length must match cache size",
        ));
    }
    let proj = cache.project(cross);
    let w = self_k - dot(cross, &proj);
    inverse_add_projected(cache, &proj, w)
}

/// Append step with a precomputed projection `K⁻¹ k` and Schur complement `w`.
pub(crate) fn inverse_add_projected(
    cache: &PdCache,
    proj: &[f64],
    w: f64,
) -> Result<PdCache, LinalgError> {
    // `!(w > floor)` also rejects NaN.
    if !(w > SCHUR_FLOOR) {
        return Err(LinalgError::NumericalDegeneracy { w });
    }
    let n = cache.size();
    let inv_w = 1.0 / w;
    let mut out = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        let pi = proj[i] * inv_w;
        for j in 0..=i {
            let v = cache.inverse[(i, j)] + pi * proj[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        out[(i, n)] = -pi;
        out[(n, i)] = -pi;
    }
    out[(n, n)] = inv_w;
    Ok(PdCache {
        inverse: out,
        log_det: cache.log_det + w.ln(),
    })
}

/// Cache for `A \ {a_index}`. Remaining points keep their relative order.
///
/// With the removed point's row of the inverse split into the diagonal entry
/// `s` and the off-diagonal part `v`, the reduced inverse is `U − v vᵀ / s`,
/// and the removed point's Schur complement is `w = 1/s`.
pub fn inverse_remove_point(cache: &PdCache, index: usize) -> Result<PdCache, LinalgError> {
    let n = cache.size();
    if index >= n {
        return Err(LinalgError::IndexOutOfRange { index, size: n });
    }
    if n == 1 {
        return Ok(PdCache::empty());
    }
    let s = cache.inverse[(index, index)];
    if !(s > 0.0) {
        return Err(LinalgError::NotPositiveDefinite { pivot: index });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != index).collect();
    let v: Vec<f64> = keep.iter().map(|&i| cache.inverse[(i, index)]).collect();
    let mut out = Matrix::zeros(n - 1, n - 1);
    for (a, &i) in keep.iter().enumerate() {
        let va = v[a] / s;
        for (b, &j) in keep.iter().enumerate().take(a + 1) {
            let val = cache.inverse[(i, j)] - va * v[b];
            out[(a, b)] = val;
            out[(b, a)] = val;
        }
    }
    // log det(A) = log det(A ∪ {x}) − log w, w = 1/s.
    Ok(PdCache {
        inverse: out,
        log_det: cache.log_det + s.ln(),
    })
}
