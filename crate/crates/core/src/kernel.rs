//! Kernel functions, kernel parameters and the point store.
//!
//! The squared-exponential kernel uses unit amplitude: a constant multiplier on
//! the kernel only shifts every partition's log-density by the same amount,
//! so it is not a free parameter. Lengthscales divide the squared difference
//! linearly, i.e. `exp(-½ Σ_d (x_d − y_d)² / l_d)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A positive-definite kernel on points of a fixed dimension.
pub trait Kernel {
    /// Evaluates the kernel. Both slices must have the kernel's dimension.
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).eval(x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential {
        lengthscales: Vec<f64>,
    },
    /// `value` on exactly equal points, zero elsewhere.
    Delta {
        value: f64,
    },
}

impl Kernel for KernelFamily {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelFamily::SquaredExponential { lengthscales } => {
                debug_assert_eq!(x.len(), lengthscales.len());
                let mut q = 0.0;
                for ((a, b), l) in x.iter().zip(y).zip(lengthscales) {
                    let d = a - b;
                    q += d * d / l;
                }
                (-0.5 * q).exp()
            }
            KernelFamily::Delta { value } => {
                if x == y {
                    *value
                } else {
                    0.0
                }
            }
        }
    }
}

/// Kernel hyperparameters plus the temperature that tempers the determinants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub temperature: f64,
}

impl Kernel for KernelParams {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.family.eval(x, y)
    }
}

impl KernelParams {
    pub fn squared_exponential(lengthscales: Vec<f64>, temperature: f64) -> Result<Self> {
        let p = Self {
            family: KernelFamily::SquaredExponential { lengthscales },
            temperature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn delta(value: f64, temperature: f64) -> Result<Self> {
        let p = Self {
            family: KernelFamily::Delta { value },
            temperature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.temperature) {
            return Err(Error::input(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        match &self.family {
            KernelFamily::SquaredExponential { lengthscales } => {
                if lengthscales.is_empty() {
                    return Err(Error::input("at least one lengthscale is required"));
                }
                if let Some(l) = lengthscales.iter().find(|&&l| !positive(l)) {
                    return Err(Error::input(format!(
                        "lengthscales must be positive, got {l}"
                    )));
                }
            }
            KernelFamily::Delta { value } => {
                if !positive(*value) {
                    return Err(Error::input(format!(
                        "delta value must be positive, got {value}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Input dimension the kernel expects, if it constrains one.
    pub fn dim(&self) -> Option<usize> {
        match &self.family {
            KernelFamily::SquaredExponential { lengthscales } => Some(lengthscales.len()),
            KernelFamily::Delta { .. } => None,
        }
    }

    /// Checks that points of dimension `d` can be fed to this kernel.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(expected) if expected != d => Err(Error::Dimension { expected, got: d }),
            _ => Ok(()),
        }
    }

    /// Log of every positive hyperparameter: kernel parameters, then temperature.
    pub fn log_vector(&self) -> Vec<f64> {
        let mut v = match &self.family {
            KernelFamily::SquaredExponential { lengthscales } => {
                lengthscales.iter().map(|l| l.ln()).collect()
            }
            KernelFamily::Delta { value } => vec![value.ln()],
        };
        v.push(self.temperature.ln());
        v
    }

    /// Inverse of [`KernelParams::log_vector`], keeping the family.
    pub fn with_log_vector(&self, v: &[f64]) -> Self {
        let (kernel, temp) = v.split_at(v.len() - 1);
        let family = match &self.family {
            KernelFamily::SquaredExponential { .. } => KernelFamily::SquaredExponential {
                lengthscales: kernel.iter().map(|x| x.exp()).collect(),
            },
            KernelFamily::Delta { .. } => KernelFamily::Delta {
                value: kernel[0].exp(),
            },
        };
        Self {
            family,
            temperature: temp[0].exp(),
        }
    }
}

/// Checked kernel evaluation.
pub fn kernel_eval(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    params.check_dim(x.len())?;
    Ok(params.eval(x, y))
}

/// A kernel multiplied by a positive constant.
#[derive(Debug, Clone)]
pub struct Scaled<K> {
    pub inner: K,
    pub alpha: f64,
}

impl<K: Kernel> Kernel for Scaled<K> {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.alpha * self.inner.eval(x, y)
    }
}

/// Gram matrix between two ordered point lists.
pub fn gram_matrix<K: Kernel>(kernel: &K, a: &[&[f64]], b: &[&[f64]]) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |i, j| kernel.eval(a[i], b[j]))
}

/// Symmetric Gram matrix of one point list; each entry is evaluated once.
pub fn gram_symmetric<K: Kernel>(kernel: &K, a: &[&[f64]]) -> Matrix {
    let n = a.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(a[i], a[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `N` distinct points in `D` dimensions with optional per-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<Option<String>>,
}

/// Bit key for exact row equality; `-0.0` and `0.0` compare equal.
fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter()
        .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect()
}

impl DataSet {
    /// Builds a dataset from rows. Rows must be finite, non-empty, of equal
    /// length and pairwise distinct.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Option<String>>) -> Result<Self> {
        let (data, expansion) = Self::deduplicated(rows, labels)?;
        if data.len() != expansion.len() {
            return Err(Error::input("duplicate rows; use DataSet::deduplicated"));
        }
        Ok(data)
    }

    /// Unlabeled dataset.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        Self::new(rows, vec![None; n])
    }

    /// Merges identical rows into one representative. Returns the dataset and
    /// the map from each input row to its representative.
    pub fn deduplicated(
        rows: Vec<Vec<f64>>,
        labels: Vec<Option<String>>,
    ) -> Result<(Self, Vec<usize>)> {
        if rows.is_empty() {
            return Err(Error::input("dataset needs at least one point"));
        }
        if labels.len() != rows.len() {
            return Err(Error::input(format!(
                "{} labels for {} points",
                labels.len(),
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::input("points need at least one dimension"));
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut values = Vec::with_capacity(rows.len() * dim);
        let mut kept_labels: Vec<Option<String>> = Vec::new();
        let mut expansion = Vec::with_capacity(rows.len());
        for (i, (row, label)) in rows.into_iter().zip(labels).enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("row {i} has a non-finite value")));
            }
            let next = kept_labels.len();
            let rep = *seen.entry(row_key(&row)).or_insert(next);
            if rep == next {
                values.extend_from_slice(&row);
                kept_labels.push(label);
            } else if let Some(l) = label {
                match &kept_labels[rep] {
                    Some(existing) if *existing != l => {
                        return Err(Error::input(format!(
                            "row {i} duplicates an earlier row with a different label ({existing} vs {l})"
                        )));
                    }
                    _ => kept_labels[rep] = Some(l),
                }
            }
            expansion.push(rep);
        }
        Ok((
            Self {
                dim,
                values,
                labels: kept_labels,
            },
            expansion,
        ))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i].is_none())
            .collect()
    }

    /// Copy of the dataset with all labels removed.
    pub fn without_labels(&self) -> Self {
        Self {
            dim: self.dim,
            values: self.values.clone(),
            labels: vec![None; self.len()],
        }
    }

    /// Gram matrix between two index subsets.
    pub fn gram<K: Kernel>(&self, kernel: &K, a: &[usize], b: &[usize]) -> Matrix {
        Matrix::from_fn(a.len(), b.len(), |i, j| {
            kernel.eval(self.point(a[i]), self.point(b[j]))
        })
    }

    /// Symmetric Gram matrix of an index subset.
    pub fn gram_sym<K: Kernel>(&self, kernel: &K, a: &[usize]) -> Matrix {
        let pts: Vec<&[f64]> = a.iter().map(|&i| self.point(i)).collect();
        gram_symmetric(kernel, &pts)
    }
}
