//! Partitions, label constraints and the cached cluster state.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::{DataSet, Kernel};
use crate::linalg::{self, LinalgError, PdCache};

/// Log-weight of an impossible outcome.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Largest `n` accepted by exhaustive partition enumeration (Bell(12) = 4 213 597).
pub const MAX_ENUMERATION: usize = 12;

/// Default number of incremental updates before a cluster cache is rebuilt.
pub const DEFAULT_REBUILD_INTERVAL: usize = 64;

/// A set partition in canonical form: cluster ids are `0..k` in order of
/// first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    assignment: Vec<usize>,
    num_clusters: usize,
}

/// Relabels an arbitrary id vector into canonical form.
pub fn canonicalize<T: Eq + Hash>(raw: &[T]) -> Partition {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    let assignment = raw
        .iter()
        .map(|v| {
            let next = ids.len();
            *ids.entry(v).or_insert(next)
        })
        .collect();
    Partition {
        assignment,
        num_clusters: ids.len(),
    }
}

impl Partition {
    pub fn from_assignment<T: Eq + Hash>(raw: &[T]) -> Self {
        canonicalize(raw)
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            num_clusters: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn together(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }

    /// Member lists, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Restriction to an ordered index subset, re-canonicalized.
    pub fn restrict(&self, indices: &[usize]) -> Partition {
        let sub: Vec<usize> = indices.iter().map(|&i| self.assignment[i]).collect();
        canonicalize(&sub)
    }

    /// Maps a partition of representatives back onto original rows, where
    /// `expansion[row]` is the representative of `row`.
    pub fn expand(&self, expansion: &[usize]) -> Partition {
        let raw: Vec<usize> = expansion.iter().map(|&r| self.assignment[r]).collect();
        canonicalize(&raw)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.assignment.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses `|`-separated non-negative integer ids. Ids need not be
    /// canonical; the result is canonicalized.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(canonicalize::<usize>(&[]));
        }
        let raw = s
            .split('|')
            .enumerate()
            .map(|(i, tok)| {
                tok.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Format(format!("assignment entry {i} ({tok:?}): {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(canonicalize(&raw))
    }
}

/// Restricted-growth-string enumeration of every set partition of `n` items.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    rgs: Vec<usize>,
    // max[i] = max(rgs[..i]) (with max[0] = 0 placeholder)
    prefix_max: Vec<usize>,
    done: bool,
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let n = self.rgs.len();
        let num_clusters = if n == 0 {
            0
        } else {
            self.prefix_max[n - 1].max(self.rgs[n - 1]) + 1
        };
        let current = Partition {
            assignment: self.rgs.clone(),
            num_clusters,
        };
        // Advance: rightmost position that can still grow.
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i] {
                self.rgs[i] += 1;
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[j - 1].max(self.rgs[j - 1]);
                }
                break;
            }
        }
        Some(current)
    }
}

/// Every set partition of `n` items exactly once, in restricted-growth-string
/// (lexicographic) order.
pub fn enumerate_partitions(n: usize) -> Result<PartitionIter> {
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge {
            what: "partition enumeration",
            n,
            max: MAX_ENUMERATION,
        });
    }
    Ok(PartitionIter {
        rgs: vec![0; n],
        prefix_max: vec![0; n],
        done: false,
    })
}

/// Observed co-membership of the labeled points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelConstraints {
    labeled: Vec<usize>,
    // label class of each labeled point; co-membership is class equality,
    // which makes the relation an equivalence by construction
    class: Vec<usize>,
}

impl LabelConstraints {
    pub fn none() -> Self {
        Self {
            labeled: Vec::new(),
            class: Vec::new(),
        }
    }

    /// Constraints from per-point optional labels.
    pub fn from_labels<L: Eq + Hash>(labels: &[Option<L>]) -> Self {
        let mut classes: HashMap<&L, usize> = HashMap::new();
        let mut labeled = Vec::new();
        let mut class = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                let next = classes.len();
                labeled.push(i);
                class.push(*classes.entry(l).or_insert(next));
            }
        }
        Self { labeled, class }
    }

    pub fn labeled_indices(&self) -> &[usize] {
        &self.labeled
    }

    pub fn is_empty(&self) -> bool {
        self.labeled.is_empty()
    }

    /// Number of distinct observed labels.
    pub fn num_classes(&self) -> usize {
        self.class.iter().max().map_or(0, |m| m + 1)
    }

    /// Label class of each labeled point, aligned with
    /// [`LabelConstraints::labeled_indices`].
    pub fn classes(&self) -> &[usize] {
        &self.class
    }

    /// Binary co-membership indicator over the labeled points.
    pub fn co_matrix(&self) -> Vec<Vec<u8>> {
        self.class
            .iter()
            .map(|a| self.class.iter().map(|b| u8::from(a == b)).collect())
            .collect()
    }

    /// Label class of a point, if labeled.
    pub fn class_of(&self, point: usize) -> Option<usize> {
        self.labeled
            .iter()
            .position(|&i| i == point)
            .map(|k| self.class[k])
    }

    /// Whether a partition reproduces every observed co-membership.
    pub fn satisfied_by(&self, p: &Partition) -> bool {
        let z = &self.labeled;
        if z.iter().any(|&i| i >= p.len()) {
            return false;
        }
        for a in 0..z.len() {
            for b in 0..a {
                if p.together(z[a], z[b]) != (self.class[a] == self.class[b]) {
                    return false;
                }
            }
        }
        true
    }
}

pub fn satisfies_constraints(p: &Partition, c: &LabelConstraints) -> bool {
    c.satisfied_by(p)
}

/// Sum of cluster log-determinants of `partition`, each computed directly
/// by Cholesky factorization.
pub fn partition_log_det<K: Kernel>(
    data: &DataSet,
    kernel: &K,
    partition: &Partition,
) -> Result<f64, LinalgError> {
    let mut total = 0.0;
    for members in partition.clusters() {
        let g = data.gram_sym(kernel, &members);
        total += linalg::cholesky_logdet(&g)?.0;
    }
    Ok(total)
}

/// Unnormalized log-density `−τ Σ log det K_S` with the label indicator,
/// computed from scratch.
pub fn partition_log_likelihood<K: Kernel>(
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    partition: &Partition,
    constraints: &LabelConstraints,
) -> Result<f64, LinalgError> {
    if !constraints.satisfied_by(partition) {
        return Ok(LOG_ZERO);
    }
    Ok(-temperature * partition_log_det(data, kernel, partition)?)
}

#[derive(Debug, Clone)]
pub struct Cluster {
    members: Vec<usize>,
    cache: PdCache,
    updates: usize,
}

impl Cluster {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn cache(&self) -> &PdCache {
        &self.cache
    }

    pub fn log_det(&self) -> f64 {
        self.cache.log_det()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Where to put a point being attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Existing(usize),
    New,
}

const DETACHED: usize = usize::MAX;

/// Cluster member lists with cached Gram inverses and log-determinants.
///
/// The state borrows neither data nor kernel; every mutating call takes them
/// explicitly and they must be the same across calls until
/// [`ClusterState::rebuild_all`] is used with a new kernel.
#[derive(Debug, Clone)]
pub struct ClusterState {
    clusters: Vec<Cluster>,
    assignment: Vec<usize>,
    rebuild_interval: usize,
    degenerate: u64,
    jittered: u64,
}

impl ClusterState {
    pub fn new<K: Kernel>(data: &DataSet, kernel: &K, partition: &Partition) -> Result<Self> {
        Self::with_rebuild_interval(data, kernel, partition, DEFAULT_REBUILD_INTERVAL)
    }

    pub fn with_rebuild_interval<K: Kernel>(
        data: &DataSet,
        kernel: &K,
        partition: &Partition,
        rebuild_interval: usize,
    ) -> Result<Self> {
        if partition.len() != data.len() {
            return Err(Error::input(format!(
                "partition covers {} points, dataset has {}",
                partition.len(),
                data.len()
            )));
        }
        let mut state = Self {
            clusters: Vec::new(),
            assignment: partition.assignment().to_vec(),
            rebuild_interval: rebuild_interval.max(1),
            degenerate: 0,
            jittered: 0,
        };
        for members in partition.clusters() {
            let (cache, jittered) = PdCache::rebuild(&data.gram_sym(kernel, &members))?;
            state.jittered += u64::from(jittered);
            state.clusters.push(Cluster {
                members,
                cache,
                updates: 0,
            });
        }
        Ok(state)
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_points(&self) -> usize {
        self.assignment.len()
    }

    /// Cluster slot of a point, `None` while detached.
    pub fn cluster_of(&self, point: usize) -> Option<usize> {
        match self.assignment[point] {
            DETACHED => None,
            c => Some(c),
        }
    }

    pub fn total_log_det(&self) -> f64 {
        self.clusters.iter().map(Cluster::log_det).sum()
    }

    /// Count of Schur complements that hit the degeneracy floor.
    pub fn degenerate_count(&self) -> u64 {
        self.degenerate
    }

    /// Count of cache rebuilds that needed diagonal jitter.
    pub fn jitter_count(&self) -> u64 {
        self.jittered
    }

    pub(crate) fn note_degenerate(&mut self, n: u64) {
        self.degenerate += n;
    }

    /// Canonical partition. Panics if a point is detached.
    pub fn partition(&self) -> Partition {
        assert!(
            self.assignment.iter().all(|&c| c != DETACHED),
            "partition requested while a point is detached"
        );
        canonicalize(&self.assignment)
    }

    /// Removes a point from its cluster, downdating the cached inverse.
    /// Clusters left empty are deleted.
    pub fn detach<K: Kernel>(&mut self, data: &DataSet, kernel: &K, point: usize) -> Result<()> {
        let c = self
            .cluster_of(point)
            .ok_or_else(|| Error::input(format!("point {point} is already detached")))?;
        self.assignment[point] = DETACHED;
        let cluster = &mut self.clusters[c];
        let pos = cluster
            .members
            .iter()
            .position(|&m| m == point)
            .expect("assignment and member lists agree");
        if cluster.members.len() == 1 {
            let last = self.clusters.len() - 1;
            self.clusters.swap_remove(c);
            if c != last {
                for &m in &self.clusters[c].members {
                    self.assignment[m] = c;
                }
            }
            return Ok(());
        }
        cluster.members.remove(pos);
        cluster.updates += 1;
        let downdated = linalg::inverse_remove_point(&cluster.cache, pos);
        match downdated {
            Ok(cache) if cluster.updates < self.rebuild_interval => cluster.cache = cache,
            _ => self.rebuild_cluster(data, kernel, c)?,
        }
        Ok(())
    }

    /// Adds a detached point to a cluster, updating the cached inverse.
    pub fn attach<K: Kernel>(
        &mut self,
        data: &DataSet,
        kernel: &K,
        point: usize,
        target: Target,
    ) -> Result<usize> {
        let cross: Vec<f64> = match target {
            Target::Existing(c) => self.clusters[c]
                .members
                .iter()
                .map(|&m| kernel.eval(data.point(m), data.point(point)))
                .collect(),
            Target::New => Vec::new(),
        };
        let proj = match target {
            Target::Existing(c) => self.clusters[c].cache.project(&cross),
            Target::New => Vec::new(),
        };
        let self_k = kernel.eval(data.point(point), data.point(point));
        let w = self_k - linalg::dot(&cross, &proj);
        self.attach_projected(data, kernel, point, target, &proj, w)
    }

    /// Attach with precomputed `K⁻¹ k` and Schur complement.
    pub(crate) fn attach_projected<K: Kernel>(
        &mut self,
        data: &DataSet,
        kernel: &K,
        point: usize,
        target: Target,
        proj: &[f64],
        w: f64,
    ) -> Result<usize> {
        if self.assignment[point] != DETACHED {
            return Err(Error::input(format!("point {point} is already attached")));
        }
        let c = match target {
            Target::Existing(c) => c,
            Target::New => {
                self.clusters.push(Cluster {
                    members: Vec::new(),
                    cache: PdCache::empty(),
                    updates: 0,
                });
                self.clusters.len() - 1
            }
        };
        self.assignment[point] = c;
        let cluster = &mut self.clusters[c];
        cluster.members.push(point);
        cluster.updates += 1;
        let updated = linalg::inverse_add_projected(&cluster.cache, proj, w);
        match updated {
            Ok(cache) if cluster.updates < self.rebuild_interval => cluster.cache = cache,
            Ok(_) => self.rebuild_cluster(data, kernel, c)?,
            Err(_) => {
                self.degenerate += 1;
                self.rebuild_cluster(data, kernel, c)?;
            }
        }
        Ok(c)
    }

    fn rebuild_cluster<K: Kernel>(&mut self, data: &DataSet, kernel: &K, c: usize) -> Result<()> {
        let cluster = &mut self.clusters[c];
        let (cache, jittered) = PdCache::rebuild(&data.gram_sym(kernel, &cluster.members))?;
        cluster.cache = cache;
        cluster.updates = 0;
        self.jittered += u64::from(jittered);
        Ok(())
    }

    /// Recomputes every cache from scratch, e.g. after a kernel change.
    pub fn rebuild_all<K: Kernel>(&mut self, data: &DataSet, kernel: &K) -> Result<()> {
        for c in 0..self.clusters.len() {
            self.rebuild_cluster(data, kernel, c)?;
        }
        Ok(())
    }
}

/// `−τ · Σ log det` of the cached state, or [`LOG_ZERO`] when the labels are
/// violated.
pub fn log_likelihood(
    state: &ClusterState,
    temperature: f64,
    constraints: &LabelConstraints,
) -> f64 {
    if !constraints.satisfied_by(&state.partition()) {
        return LOG_ZERO;
    }
    -temperature * state.total_log_det()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelParams;

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(&[5, 5, 2, 2]).assignment(), &[0, 0, 1, 1]);
        assert_eq!(canonicalize(&[1, 2, 1, 2]).assignment(), &[0, 1, 0, 1]);
        let p = canonicalize(&[7]);
        assert_eq!(p.assignment(), &[0]);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn display_and_parse() {
        let p = canonicalize(&[3, 3, 9, 1]);
        assert_eq!(p.to_string(), "0|0|1|2");
        assert_eq!("4|4|0|8".parse::<Partition>().unwrap(), p);
        assert!("0||1".parse::<Partition>().is_err());
        assert!("a".parse::<Partition>().is_err());
        assert!("".parse::<Partition>().unwrap().is_empty());
    }

    #[test]
    fn constraints_from_labels_examples() {
        let c = LabelConstraints::from_labels(&[Some("A"), Some("A"), Some("B")]);
        assert_eq!(c.labeled_indices(), &[0, 1, 2]);
        assert_eq!(
            c.co_matrix(),
            vec![vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]
        );

        let c = LabelConstraints::from_labels::<&str>(&[None, None]);
        assert!(c.is_empty());
        assert!(c.co_matrix().is_empty());

        let c = LabelConstraints::from_labels(&[Some("A"), None, Some("A")]);
        assert_eq!(c.labeled_indices(), &[0, 2]);
        assert_eq!(c.co_matrix(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn satisfies_examples() {
        let c = LabelConstraints::from_labels(&[Some("A"), Some("A"), Some("B")]);
        assert!(c.satisfied_by(&canonicalize(&[0, 0, 1])));
        assert!(!c.satisfied_by(&canonicalize(&[0, 1, 1])));
        assert!(!c.satisfied_by(&canonicalize(&[0, 0, 0])));
        assert!(LabelConstraints::none().satisfied_by(&canonicalize(&[0, 1, 1])));
    }

    #[test]
    fn enumeration_counts() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(enumerate_partitions(n).unwrap().count(), b, "n = {n}");
        }
        assert!(enumerate_partitions(13).is_err());
    }

    #[test]
    fn enumeration_is_canonical_and_ordered() {
        let all: Vec<Partition> = enumerate_partitions(4).unwrap().collect();
        for p in &all {
            assert_eq!(&canonicalize(p.assignment()), p);
        }
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, all);
        assert_eq!(all[0].assignment(), &[0, 0, 0, 0]);
        assert_eq!(all.last().unwrap().assignment(), &[0, 1, 2, 3]);
    }

    #[test]
    fn delta_likelihood_is_partition_free() {
        let data = DataSet::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let k = KernelParams::delta(2.0, 1.0).unwrap();
        for p in enumerate_partitions(3).unwrap() {
            let state = ClusterState::new(&data, &k, &p).unwrap();
            let ll = log_likelihood(&state, 1.0, &LabelConstraints::none());
            assert!((ll + 3.0 * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn violated_constraints_give_log_zero() {
        let data = DataSet::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let k = KernelParams::squared_exponential(vec![1.0], 1.0).unwrap();
        let c = LabelConstraints::from_labels(&[Some(1), Some(2)]);
        let state = ClusterState::new(&data, &k, &Partition::single_cluster(2)).unwrap();
        assert_eq!(log_likelihood(&state, 1.0, &c), LOG_ZERO);
    }

    #[test]
    fn detach_attach_keeps_caches_consistent() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64 * 0.3, (i * i) as f64 * 0.1])
            .collect();
        let data = DataSet::from_rows(rows).unwrap();
        let k = KernelParams::squared_exponential(vec![1.0, 2.0], 1.0).unwrap();
        let mut state = ClusterState::new(&data, &k, &canonicalize(&[0, 0, 1, 1, 0, 2])).unwrap();
        state.detach(&data, &k, 5).unwrap();
        assert_eq!(state.num_clusters(), 2);
        state.detach(&data, &k, 1).unwrap();
        state.attach(&data, &k, 1, Target::Existing(1)).unwrap();
        state.attach(&data, &k, 5, Target::New).unwrap();
        let p = state.partition();
        assert_eq!(p, canonicalize(&[0, 1, 1, 1, 0, 2]));
        let direct = partition_log_det(&data, &k, &p).unwrap();
        assert!((direct - state.total_log_det()).abs() < 1e-10);
        for cl in state.clusters() {
            let g = data.gram_sym(&k, cl.members());
            let prod = g.matmul(cl.cache().inverse());
            assert!(prod.max_abs_diff(&crate::linalg::Matrix::identity(cl.len())) < 1e-8);
        }
    }

    #[test]
    fn detach_twice_is_an_error() {
        let data = DataSet::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let k = KernelParams::delta(1.0, 1.0).unwrap();
        let mut state = ClusterState::new(&data, &k, &Partition::singletons(2)).unwrap();
        state.detach(&data, &k, 0).unwrap();
        assert!(state.detach(&data, &k, 0).is_err());
    }

    #[test]
    fn restrict_and_expand() {
        let p = canonicalize(&[2, 0, 2, 1]);
        assert_eq!(p.restrict(&[3, 0, 2]).assignment(), &[0, 1, 1]);
        assert_eq!(p.expand(&[1, 1, 0]).assignment(), &[0, 0, 1]);
    }
}
