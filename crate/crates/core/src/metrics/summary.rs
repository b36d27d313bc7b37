use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::sampler::PosteriorTrace;

use super::{adjusted_rand_index_on, normalized_mutual_information_on, NMI_VARIANT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub num_samples: usize,
    /// Fraction of samples with each cluster count.
    pub cluster_count_histogram: BTreeMap<usize, f64>,
    /// Fraction of samples in which each pair of points shares a cluster.
    pub co_occurrence: Vec<Vec<f64>>,
    pub mean_ari: Option<f64>,
    pub mean_nmi: Option<f64>,
    pub nmi_variant: &'static str,
    pub hyper_acceptance_rate: f64,
    pub degenerate_moves: u64,
}

/// Summarizes the recorded samples. With a ground truth, ARI and NMI are
/// computed per sample on `test_indices` (all points when `None`) and
/// averaged.
pub fn summarize(
    trace: &PosteriorTrace,
    truth: Option<&Partition>,
    test_indices: Option<&[usize]>,
) -> Result<PosteriorSummary> {
    summarize_partitions(
        trace.samples.iter().map(|s| &s.partition),
        truth,
        test_indices,
    )
    .map(|mut s| {
        s.hyper_acceptance_rate = trace.acceptance_rate();
        s.degenerate_moves = trace.degenerate_moves;
        s
    })
}

/// Same as [`summarize`], over bare partitions.
pub fn summarize_partitions<'a>(
    partitions: impl IntoIterator<Item = &'a Partition>,
    truth: Option<&Partition>,
    test_indices: Option<&[usize]>,
) -> Result<PosteriorSummary> {
    let partitions: Vec<&Partition> = partitions.into_iter().collect();
    let first = partitions
        .first()
        .ok_or_else(|| Error::input("cannot summarize an empty trace"))?;
    let n = first.len();
    let m = partitions.len() as f64;

    let mut histogram: BTreeMap<usize, f64> = BTreeMap::new();
    let mut co = vec![vec![0.0; n]; n];
    for p in &partitions {
        if p.len() != n {
            return Err(Error::input("trace samples differ in size"));
        }
        *histogram.entry(p.num_clusters()).or_default() += 1.0;
        for members in p.clusters() {
            for &i in &members {
                for &j in &members {
                    co[i][j] += 1.0;
                }
            }
        }
    }
    histogram.values_mut().for_each(|v| *v /= m);
    co.iter_mut().flatten().for_each(|v| *v /= m);

    let (mean_ari, mean_nmi) = match truth {
        None => (None, None),
        Some(truth) => {
            let all: Vec<usize> = (0..n).collect();
            let idx = test_indices.unwrap_or(&all);
            let mut ari = 0.0;
            let mut nmi = 0.0;
            for p in &partitions {
                ari += adjusted_rand_index_on(truth, p, idx)?;
                nmi += normalized_mutual_information_on(truth, p, idx)?;
            }
            (Some(ari / m), Some(nmi / m))
        }
    };

    Ok(PosteriorSummary {
        num_samples: partitions.len(),
        cluster_count_histogram: histogram,
        co_occurrence: co,
        mean_ari,
        mean_nmi,
        nmi_variant: NMI_VARIANT,
        hyper_acceptance_rate: 0.0,
        degenerate_moves: 0,
    })
}
