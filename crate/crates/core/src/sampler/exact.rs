//! Exact partition posterior by enumeration, for small `N`.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{DataSet, Kernel};
use crate::linalg::{self, LinalgError};
use crate::partition::{
    enumerate_partitions, LabelConstraints, Partition, LOG_ZERO, MAX_ENUMERATION,
};
use crate::sampler::gibbs::{log_sum_exp, sample_log_categorical};

/// Log-determinants of Gram submatrices, memoized by member bitmask.
struct SubsetLogDets<'a, K> {
    data: &'a DataSet,
    kernel: &'a K,
    memo: HashMap<u32, f64>,
}

impl<'a, K: Kernel> SubsetLogDets<'a, K> {
    fn new(data: &'a DataSet, kernel: &'a K) -> Self {
        Self {
            data,
            kernel,
            memo: HashMap::new(),
        }
    }

    fn partition_log_det(&mut self, p: &Partition) -> Result<f64, LinalgError> {
        let mut masks = vec![0u32; p.num_clusters()];
        for (i, &c) in p.assignment().iter().enumerate() {
            masks[c] |= 1 << i;
        }
        let mut total = 0.0;
        for mask in masks {
            total += self.subset(mask)?;
        }
        Ok(total)
    }

    fn subset(&mut self, mask: u32) -> Result<f64, LinalgError> {
        if let Some(&v) = self.memo.get(&mask) {
            return Ok(v);
        }
        let members: Vec<usize> = (0..32).filter(|i| mask & (1 << i) != 0).collect();
        let g = self.data.gram_sym(self.kernel, &members);
        let v = linalg::cholesky_logdet(&g)?.0;
        self.memo.insert(mask, v);
        Ok(v)
    }
}

/// Normalized posterior over every constraint-satisfying partition.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    entries: Vec<(Partition, f64)>,
    index: HashMap<Partition, usize>,
    log_normalizer: f64,
}

impl ExactPosterior {
    /// Partitions with their probabilities, in restricted-growth order.
    pub fn entries(&self) -> &[(Partition, f64)] {
        &self.entries
    }

    /// Probability of a partition; zero for anything outside the support.
    pub fn probability(&self, p: &Partition) -> f64 {
        self.index.get(p).map_or(0.0, |&i| self.entries[i].1)
    }

    /// `log Σ_S exp(−τ Σ log det K_S)` over the support.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn mode(&self) -> &Partition {
        &self
            .entries
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("posterior support is never empty")
            .0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Partition {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (p, prob) in &self.entries {
            acc += prob;
            if u < acc {
                return p;
            }
        }
        &self.entries.last().expect("non-empty support").0
    }
}

/// Unnormalized log-weights `−τ Σ log det` of every constraint-satisfying
/// partition of the dataset.
pub fn enumerate_log_weights<K: Kernel>(
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
) -> Result<Vec<(Partition, f64)>> {
    let n = data.len();
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge {
            what: "exact posterior",
            n,
            max: MAX_ENUMERATION,
        });
    }
    let mut dets = SubsetLogDets::new(data, kernel);
    let mut out = Vec::new();
    for p in enumerate_partitions(n)? {
        if !constraints.satisfied_by(&p) {
            continue;
        }
        let lw = -temperature * dets.partition_log_det(&p)?;
        out.push((p, lw));
    }
    Ok(out)
}

/// Exact partition posterior. `N` is limited to 12.
pub fn exact_posterior<K: Kernel>(
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
) -> Result<ExactPosterior> {
    let weighted = enumerate_log_weights(data, kernel, temperature, constraints)?;
    let logs: Vec<f64> = weighted.iter().map(|(_, w)| *w).collect();
    let lse = log_sum_exp(&logs);
    if lse == LOG_ZERO {
        return Err(Error::input("constraints admit no partition"));
    }
    let entries: Vec<(Partition, f64)> = weighted
        .into_iter()
        .map(|(p, w)| (p, (w - lse).exp()))
        .collect();
    let index = entries
        .iter()
        .enumerate()
        .map(|(i, (p, _))| (p.clone(), i))
        .collect();
    Ok(ExactPosterior {
        entries,
        index,
        log_normalizer: lse,
    })
}

/// One exact draw from the partition density restricted to `constraints`.
pub fn sample_exact<K: Kernel, R: Rng + ?Sized>(
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
    rng: &mut R,
) -> Result<Partition> {
    let weighted = enumerate_log_weights(data, kernel, temperature, constraints)?;
    let logs: Vec<f64> = weighted.iter().map(|(_, w)| *w).collect();
    let i = sample_log_categorical(&logs, rng)
        .ok_or_else(|| Error::input("constraints admit no partition"))?;
    Ok(weighted.into_iter().nth(i).expect("index in range").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelParams;

    #[test]
    fn delta_three_points_uniform() {
        let data = DataSet::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let k = KernelParams::delta(2.0, 1.0).unwrap();
        let post = exact_posterior(&data, &k, 1.0, &LabelConstraints::none()).unwrap();
        assert_eq!(post.len(), 5);
        for (_, p) in post.entries() {
            assert!((p - 0.2).abs() < 1e-12);
        }
        let total: f64 = post.entries().iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forcing_constraints_give_point_mass() {
        let data = DataSet::from_rows(vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let k = KernelParams::squared_exponential(vec![1.0], 1.0).unwrap();
        let c = LabelConstraints::from_labels(&[Some("a"), Some("a"), Some("a")]);
        let post = exact_posterior(&data, &k, 1.0, &c).unwrap();
        assert_eq!(post.len(), 1);
        assert_eq!(post.probability(&Partition::single_cluster(3)), 1.0);
        assert_eq!(post.probability(&Partition::singletons(3)), 0.0);
    }

    #[test]
    fn well_separated_pairs_mode() {
        let data = DataSet::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.0, 10.1],
        ])
        .unwrap();
        let k = KernelParams::squared_exponential(vec![0.05, 0.05], 1.0).unwrap();
        let post = exact_posterior(&data, &k, 1.0, &LabelConstraints::none()).unwrap();
        // Merging never lowers the density (Fischer's inequality), so the
        // pairing can only tie with the all-together partition here.
        let best = post.entries().iter().map(|e| e.1).fold(0.0, f64::max);
        let pairing = post.probability(&Partition::from_assignment(&[0, 0, 1, 1]));
        assert!(pairing >= best * (1.0 - 1e-9));
        for (p, prob) in post.entries() {
            if !(p.together(0, 1) && p.together(2, 3)) {
                assert!(*prob < 0.5 * pairing, "{p} has {prob}");
            }
        }
    }

    #[test]
    fn guard_on_size() {
        let data = DataSet::from_rows((0..13).map(|i| vec![i as f64]).collect()).unwrap();
        let k = KernelParams::delta(1.0, 1.0).unwrap();
        assert!(matches!(
            exact_posterior(&data, &k, 1.0, &LabelConstraints::none()),
            Err(Error::TooLarge { .. })
        ));
    }
}
