//! Clustering agreement metrics, the k-means baseline and posterior summaries.

mod kmeans;
mod summary;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::partition::Partition;

pub use kmeans::{kmeans, KMeans, KMeansFit};
pub use summary::{summarize, summarize_partitions, PosteriorSummary};

/// Normalizer used by [`normalized_mutual_information`].
pub const NMI_VARIANT: &str = "arithmetic";

/// Cross-tabulation of two labelings of the same points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Builds the table from two id slices of equal length. Ids are
    /// arbitrary; rows and columns follow first occurrence.
    pub fn new(p: &[usize], q: &[usize]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::input(format!(
                "partitions differ in size ({} vs {})",
                p.len(),
                q.len()
            )));
        }
        let mut rows: HashMap<usize, usize> = HashMap::new();
        let mut cols: HashMap<usize, usize> = HashMap::new();
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(p.len());
        for (&a, &b) in p.iter().zip(q) {
            let nr = rows.len();
            let r = *rows.entry(a).or_insert(nr);
            let nc = cols.len();
            let c = *cols.entry(b).or_insert(nc);
            cells.push((r, c));
        }
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (r, c) in cells {
            counts[r][c] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols.len())
            .map(|c| counts.iter().map(|r| r[c]).sum())
            .collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: p.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

fn check_pair(p: &Partition, q: &Partition) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::input(format!(
            "partitions differ in size ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Adjusted Rand index (Hubert & Arabie). Equal to 1 for identical
/// partitions, 0 in expectation for random ones, and may be negative.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    check_pair(p, q)?;
    if p.len() < 2 {
        return Err(Error::Undefined("adjusted Rand index"));
    }
    let t = ContingencyTable::new(p.assignment(), q.assignment())?;
    let index: f64 = t.counts.iter().flatten().map(|&n| pairs(n)).sum();
    let a: f64 = t.row_sums.iter().map(|&n| pairs(n)).sum();
    let b: f64 = t.col_sums.iter().map(|&n| pairs(n)).sum();
    let expected = a * b / pairs(t.total);
    let max = 0.5 * (a + b);
    if max == expected {
        // Both all-singletons or both one cluster: the partitions agree.
        return Ok(if p == q { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(sums: &[u64], total: f64) -> f64 {
    sums.iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let pr = n as f64 / total;
            -pr * pr.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two
/// entropies (natural log). Lies in `[0, 1]`.
pub fn normalized_mutual_information(p: &Partition, q: &Partition) -> Result<f64> {
    check_pair(p, q)?;
    if p.is_empty() {
        return Err(Error::Undefined("normalized mutual information"));
    }
    let t = ContingencyTable::new(p.assignment(), q.assignment())?;
    let n = t.total as f64;
    let hp = entropy(&t.row_sums, n);
    let hq = entropy(&t.col_sums, n);
    if hp + hq == 0.0 {
        return Ok(if p == q { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * (n * nij / (t.row_sums[r] as f64 * t.col_sums[c] as f64)).ln();
        }
    }
    Ok((mi / (0.5 * (hp + hq))).clamp(0.0, 1.0))
}

/// ARI restricted to an index subset (e.g. held-out test points).
pub fn adjusted_rand_index_on(p: &Partition, q: &Partition, indices: &[usize]) -> Result<f64> {
    check_pair(p, q)?;
    check_indices(p.len(), indices)?;
    adjusted_rand_index(&p.restrict(indices), &q.restrict(indices))
}

/// NMI restricted to an index subset.
pub fn normalized_mutual_information_on(
    p: &Partition,
    q: &Partition,
    indices: &[usize],
) -> Result<f64> {
    check_pair(p, q)?;
    check_indices(p.len(), indices)?;
    normalized_mutual_information(&p.restrict(indices), &q.restrict(indices))
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    match indices.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::input(format!(
            "index {i} out of range for {n} points"
        ))),
        None => Ok(()),
    }
}
