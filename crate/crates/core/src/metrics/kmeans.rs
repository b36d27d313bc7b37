//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::DataSet;
use crate::partition::{canonicalize, Partition};
use crate::rng::{stream, Stream};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub partition: Partition,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after seeding and after each iteration.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct KMeans {
    pub k: usize,
    pub max_iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

impl KMeans {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iterations: MAX_ITERATIONS,
        }
    }

    pub fn fit<R: Rng + ?Sized>(&self, data: &DataSet, rng: &mut R) -> Result<KMeansFit> {
        let n = data.len();
        let k = self.k;
        if k == 0 || k > n {
            return Err(Error::input(format!("k must be in 1..={n}, got {k}")));
        }
        let mut centroids = self.seed(data, rng);
        let mut labels: Vec<usize> = data.points().map(|x| nearest(x, &centroids).0).collect();
        let mut inertia = vec![self.inertia(data, &labels, &centroids)];
        let mut iterations = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            centroids = self.update_centroids(data, &mut labels, &centroids);
            let next: Vec<usize> = data.points().map(|x| nearest(x, &centroids).0).collect();
            let changed = next != labels;
            labels = next;
            inertia.push(self.inertia(data, &labels, &centroids));
            if !changed {
                break;
            }
        }
        Ok(KMeansFit {
            partition: canonicalize(&labels),
            centroids,
            inertia,
            iterations,
        })
    }

    /// k-means++: first centre uniform, then proportional to squared
    /// distance from the nearest chosen centre.
    fn seed<R: Rng + ?Sized>(&self, data: &DataSet, rng: &mut R) -> Vec<Vec<f64>> {
        let n = data.len();
        let mut centroids = vec![data.point(rng.random_range(0..n)).to_vec()];
        let mut d2: Vec<f64> = data.points().map(|x| sq_dist(x, &centroids[0])).collect();
        while centroids.len() < self.k {
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        chosen = i;
                        break;
                    }
                    u -= d;
                }
                chosen
            } else {
                rng.random_range(0..n)
            };
            let c = data.point(pick).to_vec();
            for (i, x) in data.points().enumerate() {
                d2[i] = d2[i].min(sq_dist(x, &c));
            }
            centroids.push(c);
        }
        centroids
    }

    /// Means of current assignments; an empty cluster is reseeded at the
    /// point farthest from its assigned centroid.
    fn update_centroids(
        &self,
        data: &DataSet,
        labels: &mut [usize],
        old: &[Vec<f64>],
    ) -> Vec<Vec<f64>> {
        let d = data.dim();
        let mut sums = vec![vec![0.0; d]; self.k];
        let mut counts = vec![0usize; self.k];
        for (x, &l) in data.points().zip(labels.iter()) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..self.k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..data.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&i, &j| {
                    sq_dist(data.point(i), &old[labels[i]])
                        .total_cmp(&sq_dist(data.point(j), &old[labels[j]]))
                });
            if let Some(i) = far {
                let from = labels[i];
                counts[from] -= 1;
                for (s, v) in sums[from].iter_mut().zip(data.point(i)) {
                    *s -= v;
                }
                labels[i] = c;
                counts[c] = 1;
                sums[c] = data.point(i).to_vec();
            }
        }
        sums.into_iter()
            .zip(&counts)
            .zip(old)
            .map(|((s, &n), prev)| {
                if n == 0 {
                    prev.clone()
                } else {
                    s.into_iter().map(|v| v / n as f64).collect()
                }
            })
            .collect()
    }

    fn inertia(&self, data: &DataSet, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
        data.points()
            .zip(labels)
            .map(|(x, &l)| sq_dist(x, &centroids[l]))
            .sum()
    }
}

/// k-means partition of the dataset's points, seeded from `seed`.
pub fn kmeans(data: &DataSet, k: usize, seed: u64) -> Result<Partition> {
    let mut rng = stream(seed, Stream::Baseline);
    Ok(KMeans::new(k).fit(data, &mut rng)?.partition)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> DataSet {
        let rows = (0..12)
            .map(|i| vec![(i % 4) as f64, (i / 4) as f64 * 0.5])
            .collect();
        DataSet::from_rows(rows).unwrap()
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let d = grid();
        assert_eq!(
            kmeans(&d, d.len(), 3).unwrap(),
            Partition::singletons(d.len())
        );
    }

    #[test]
    fn k_one_gives_single_cluster() {
        let d = grid();
        assert_eq!(
            kmeans(&d, 1, 3).unwrap(),
            Partition::single_cluster(d.len())
        );
    }

    #[test]
    fn k_out_of_range() {
        let d = grid();
        assert!(kmeans(&d, 0, 1).is_err());
        assert!(kmeans(&d, 13, 1).is_err());
    }

    #[test]
    fn inertia_never_increases() {
        let d = grid();
        for seed in 0..20 {
            let mut rng = stream(seed, Stream::Baseline);
            let fit = KMeans::new(3).fit(&d, &mut rng).unwrap();
            for w in fit.inertia.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", fit.inertia);
            }
        }
    }
}
