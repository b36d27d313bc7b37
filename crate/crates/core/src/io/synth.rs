//! Synthetic semi-supervised scenarios.
//!
//! * `OverlapPair`: two Gaussian clusters of different spread, plus boundary
//!   points that truly belong to one cluster but lie nearer the other
//!   cluster's mean.
//! * `MultiModal`: cluster 0 is a two-component mixture, cluster 1 a
//!   three-component mixture whose third component is entirely unlabeled and
//!   equidistant from the two clusters' labeled means.
//! * `Blobs`: plain isotropic clusters.
//!
//! Labeled points carry the label `c<cluster>`. Test points (held out per
//! component, hidden components, boundary points) are unlabeled.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DataSet;
use crate::linalg::{self, Matrix};
use crate::partition::{canonicalize, Partition};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    OverlapPair,
    MultiModal,
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub cluster: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub count: usize,
    /// Points of this component left unlabeled and scored.
    #[serde(default)]
    pub test_count: usize,
    /// Whole component unlabeled (and scored).
    #[serde(default)]
    pub hidden: bool,
}

/// Points of `cluster` placed on the segment from its mean towards the mean
/// of `toward`, past the midpoint, with perpendicular Gaussian jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub cluster: usize,
    pub toward: usize,
    pub count: usize,
    /// Range of the fraction of the way from own mean to the other mean;
    /// both ends must exceed 0.5.
    pub position: (f64, f64),
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub scenario: Scenario,
    pub components: Vec<Component>,
    #[serde(default)]
    pub boundary: Vec<Boundary>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub data: DataSet,
    pub truth: Partition,
    pub test_indices: Vec<usize>,
}

fn iso(var: f64) -> Vec<Vec<f64>> {
    vec![vec![var, 0.0], vec![0.0, var]]
}

impl SyntheticSpec {
    /// Pinned default parameters for a scenario.
    pub fn default_for(scenario: Scenario, seed: u64) -> Self {
        match scenario {
            Scenario::OverlapPair => Self {
                scenario,
                components: vec![
                    Component {
                        cluster: 0,
                        mean: vec![0.0, 0.0],
                        cov: iso(1.0),
                        count: 40,
                        test_count: 4,
                        hidden: false,
                    },
                    Component {
                        cluster: 1,
                        mean: vec![4.0, 0.0],
                        cov: iso(0.16),
                        count: 20,
                        test_count: 4,
                        hidden: false,
                    },
                ],
                boundary: vec![Boundary {
                    cluster: 0,
                    toward: 1,
                    count: 6,
                    position: (0.52, 0.6),
                    jitter: 0.5,
                }],
                seed,
            },
            Scenario::MultiModal => Self {
                scenario,
                components: vec![
                    Component {
                        cluster: 0,
                        mean: vec![-4.5, 2.25],
                        cov: iso(0.09),
                        count: 15,
                        test_count: 3,
                        hidden: false,
                    },
                    Component {
                        cluster: 0,
                        mean: vec![-4.5, -2.25],
                        cov: iso(0.09),
                        count: 15,
                        test_count: 3,
                        hidden: false,
                    },
                    Component {
                        cluster: 1,
                        mean: vec![4.5, 2.25],
                        cov: iso(0.09),
                        count: 15,
                        test_count: 3,
                        hidden: false,
                    },
                    Component {
                        cluster: 1,
                        mean: vec![4.5, -2.25],
                        cov: iso(0.09),
                        count: 15,
                        test_count: 3,
                        hidden: false,
                    },
                    Component {
                        cluster: 1,
                        mean: vec![0.0, 5.25],
                        cov: iso(0.09),
                        count: 12,
                        test_count: 0,
                        hidden: true,
                    },
                ],
                boundary: Vec::new(),
                seed,
            },
            Scenario::Blobs => Self {
                scenario,
                components: vec![
                    Component {
                        cluster: 0,
                        mean: vec![0.0, 0.0],
                        cov: iso(1.0),
                        count: 25,
                        test_count: 5,
                        hidden: false,
                    },
                    Component {
                        cluster: 1,
                        mean: vec![10.0, 0.0],
                        cov: iso(1.0),
                        count: 25,
                        test_count: 5,
                        hidden: false,
                    },
                ],
                boundary: Vec::new(),
                seed,
            },
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.cluster + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self
            .components
            .first()
            .ok_or_else(|| Error::input("synthetic spec needs at least one component"))?
            .mean
            .len();
        if dim == 0 {
            return Err(Error::input("component means need at least one dimension"));
        }
        let k = self.num_clusters();
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != dim || c.cov.len() != dim || c.cov.iter().any(|r| r.len() != dim) {
                return Err(Error::input(format!(
                    "component {i} has inconsistent dimensions"
                )));
            }
            if c.count == 0 {
                return Err(Error::input(format!("component {i} has no points")));
            }
            if c.test_count > c.count {
                return Err(Error::input(format!(
                    "component {i} holds out more points than it has"
                )));
            }
            let cov = Matrix::from_rows(&c.cov);
            if !cov.is_symmetric() || linalg::cholesky(&cov).is_err() {
                return Err(Error::input(format!(
                    "component {i} covariance is not symmetric positive definite"
                )));
            }
            if c.mean
                .iter()
                .chain(c.cov.iter().flatten())
                .any(|v| !v.is_finite())
            {
                return Err(Error::input(format!(
                    "component {i} has non-finite parameters"
                )));
            }
        }
        if (0..k).any(|c| !self.components.iter().any(|comp| comp.cluster == c)) {
            return Err(Error::input("cluster ids must be contiguous from 0"));
        }
        for b in &self.boundary {
            if b.cluster >= k || b.toward >= k || b.cluster == b.toward {
                return Err(Error::input(
                    "boundary clusters must be two distinct existing clusters",
                ));
            }
            let (lo, hi) = b.position;
            if !(lo > 0.5 && lo <= hi && hi < 1.0) || !(b.jitter >= 0.0 && b.jitter.is_finite()) {
                return Err(Error::input(
                    "boundary position must satisfy 0.5 < lo <= hi < 1 with non-negative jitter",
                ));
            }
        }
        Ok(())
    }

    /// Mean of each cluster's component means, weighted by counts.
    fn cluster_means(&self) -> Vec<Vec<f64>> {
        let dim = self.components[0].mean.len();
        let k = self.num_clusters();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0.0; k];
        for c in &self.components {
            counts[c.cluster] += c.count as f64;
            for (s, m) in sums[c.cluster].iter_mut().zip(&c.mean) {
                *s += m * c.count as f64;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, n)| s.into_iter().map(|v| v / n).collect())
            .collect()
    }
}

fn gaussian<R: Rng + ?Sized>(mean: &[f64], chol: &Matrix, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..mean.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let lz = chol.mul_vec(&z);
    mean.iter().zip(lz).map(|(m, v)| m + v).collect()
}

/// Generates the dataset, its ground truth and the scored (test) indices.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut truth = Vec::new();
    let mut test = Vec::new();

    for c in &spec.components {
        let chol = linalg::cholesky(&Matrix::from_rows(&c.cov))?;
        let labeled = if c.hidden { 0 } else { c.count - c.test_count };
        for j in 0..c.count {
            rows.push(gaussian(&c.mean, &chol, &mut rng));
            truth.push(c.cluster);
            if j < labeled {
                labels.push(Some(format!("c{}", c.cluster)));
            } else {
                test.push(rows.len() - 1);
                labels.push(None);
            }
        }
    }

    let means = spec.cluster_means();
    for b in &spec.boundary {
        let (a, t) = (&means[b.cluster], &means[b.toward]);
        let dir: Vec<f64> = t.iter().zip(a).map(|(x, y)| x - y).collect();
        let norm2: f64 = dir.iter().map(|v| v * v).sum();
        for _ in 0..b.count {
            let frac = rng.random_range(b.position.0..=b.position.1);
            let noise: Vec<f64> = (0..dir.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b.jitter * z
                })
                .collect();
            // keep only the jitter orthogonal to the segment
            let along = if norm2 > 0.0 {
                linalg::dot(&noise, &dir) / norm2
            } else {
                0.0
            };
            let p: Vec<f64> = (0..dir.len())
                .map(|d| a[d] + frac * dir[d] + noise[d] - along * dir[d])
                .collect();
            rows.push(p);
            truth.push(b.cluster);
            labels.push(None);
            test.push(rows.len() - 1);
        }
    }

    Ok(SyntheticData {
        data: DataSet::new(rows, labels)?,
        truth: canonicalize(&truth),
        test_indices: test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multimodal_defaults() {
        let spec = SyntheticSpec::default_for(Scenario::MultiModal, 3);
        assert_eq!(spec.components.len(), 5);
        assert_eq!(spec.components.iter().filter(|c| c.cluster == 0).count(), 2);
        assert_eq!(spec.components.iter().filter(|c| c.cluster == 1).count(), 3);
        let s = generate_synthetic(&spec).unwrap();
        assert_eq!(s.truth.num_clusters(), 2);
        let hidden: Vec<usize> = (60..72).collect();
        for i in &hidden {
            assert!(s.data.labels()[*i].is_none());
            assert!(s.test_indices.contains(i));
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let spec = SyntheticSpec::default_for(Scenario::OverlapPair, 11);
        assert_eq!(
            generate_synthetic(&spec).unwrap(),
            generate_synthetic(&spec).unwrap()
        );
        let other = SyntheticSpec {
            seed: 12,
            ..spec.clone()
        };
        assert_ne!(
            generate_synthetic(&spec).unwrap().data,
            generate_synthetic(&other).unwrap().data
        );
    }

    #[test]
    fn boundary_points_lie_nearer_the_other_mean() {
        let spec = SyntheticSpec::default_for(Scenario::OverlapPair, 5);
        let s = generate_synthetic(&spec).unwrap();
        let means = spec.cluster_means();
        let d2 =
            |x: &[f64], m: &[f64]| -> f64 { x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum() };
        let n = s.data.len();
        for i in n - 6..n {
            let x = s.data.point(i);
            assert!(d2(x, &means[1]) < d2(x, &means[0]));
            assert_eq!(s.truth.assignment()[i], s.truth.assignment()[0]);
        }
    }

    #[test]
    fn overlap_without_boundary_is_two_blobs() {
        let mut spec = SyntheticSpec::default_for(Scenario::OverlapPair, 5);
        spec.boundary[0].count = 0;
        let s = generate_synthetic(&spec).unwrap();
        assert_eq!(s.data.len(), 60);
        assert_eq!(s.truth.num_clusters(), 2);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = SyntheticSpec::default_for(Scenario::Blobs, 0);
        spec.components[0].cov = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = SyntheticSpec::default_for(Scenario::Blobs, 0);
        spec.components[0].count = 0;
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = SyntheticSpec::default_for(Scenario::OverlapPair, 0);
        spec.boundary[0].position = (0.3, 0.6);
        assert!(generate_synthetic(&spec).is_err());
    }
}
