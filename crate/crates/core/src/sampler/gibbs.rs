//! Single-point Gibbs moves over partitions.
//!
//! With `x` removed, joining cluster `S_m` multiplies that cluster's
//! determinant by the Schur complement `w_m = k(x,x) − k(x,S_m)ᵀ K_{S_m}⁻¹ k(S_m,x)`
//! and opening a new cluster contributes `k(x,x)`. The conditional weights
//! are those factors raised to `−τ`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{DataSet, Kernel};
use crate::linalg::{dot, SCHUR_FLOOR};
use crate::partition::{ClusterState, LabelConstraints, Target, LOG_ZERO};

/// Numerically stable `log Σ exp(w_i)`; [`LOG_ZERO`] for an all-impossible
/// or empty input.
pub fn log_sum_exp(weights: &[f64]) -> f64 {
    let max = weights.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    max + weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln()
}

/// Normalized probabilities from log-weights.
pub fn normalize_log_weights(weights: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(weights);
    weights.iter().map(|w| (w - lse).exp()).collect()
}

/// Draws an index with probability proportional to `exp(weights[i])`.
/// Returns `None` when every weight is impossible.
pub fn sample_log_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = weights.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO || max.is_nan() {
        return None;
    }
    let scaled: Vec<f64> = weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &s) in scaled.iter().enumerate() {
        if s > 0.0 {
            if u < s {
                return Some(i);
            }
            u -= s;
            last = Some(i);
        }
    }
    // round-off fell off the end
    last
}

/// Full conditional of one detached point.
#[derive(Debug, Clone)]
pub struct Conditional {
    /// One entry per existing cluster, then one for a new cluster.
    pub log_weights: Vec<f64>,
    /// Raw (unclamped) Schur complement per existing cluster.
    pub schur: Vec<f64>,
    /// Number of clusters whose Schur complement hit the floor.
    pub degenerate: usize,
    projections: Vec<Vec<f64>>,
}

impl Conditional {
    pub fn probabilities(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_weights)
    }
}

/// Log-weights for placing the detached `point` into each existing cluster
/// or a new one.
///
/// Labeled points are only ever placed consistently with the constraints:
/// into the cluster holding their class-mates if one exists, otherwise into
/// a cluster free of other labels or a new cluster.
pub fn gibbs_conditional<K: Kernel>(
    state: &ClusterState,
    data: &DataSet,
    point: usize,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
) -> Conditional {
    debug_assert!(state.cluster_of(point).is_none(), "point must be detached");
    let x = data.point(point);
    let self_k = kernel.eval(x, x);
    let m = state.num_clusters();

    let allowed = allowed_targets(state, point, constraints);

    let mut log_weights = Vec::with_capacity(m + 1);
    let mut schur = Vec::with_capacity(m);
    let mut projections = Vec::with_capacity(m);
    let mut degenerate = 0;
    for (c, cluster) in state.clusters().iter().enumerate() {
        let cross: Vec<f64> = cluster
            .members()
            .iter()
            .map(|&j| kernel.eval(data.point(j), x))
            .collect();
        let proj = cluster.cache().project(&cross);
        let w = self_k - dot(&cross, &proj);
        let clamped = if w > SCHUR_FLOOR {
            w
        } else {
            degenerate += 1;
            SCHUR_FLOOR
        };
        let allowed_here = allowed.as_ref().is_none_or(|a| a[c]);
        log_weights.push(if allowed_here {
            -temperature * clamped.ln()
        } else {
            LOG_ZERO
        });
        schur.push(w);
        projections.push(proj);
    }
    let new_allowed = allowed.as_ref().is_none_or(|a| a[m]);
    log_weights.push(if new_allowed {
        -temperature * self_k.ln()
    } else {
        LOG_ZERO
    });
    Conditional {
        log_weights,
        schur,
        degenerate,
        projections,
    }
}

/// `None` when the point is unlabeled (everything allowed).
fn allowed_targets(
    state: &ClusterState,
    point: usize,
    constraints: &LabelConstraints,
) -> Option<Vec<bool>> {
    let class = constraints.class_of(point)?;
    let m = state.num_clusters();
    let mut allowed = vec![true; m + 1];
    let mut home = None;
    for (c, cluster) in state.clusters().iter().enumerate() {
        for &j in cluster.members() {
            match constraints.class_of(j) {
                Some(other) if other == class => home = Some(c),
                Some(_) => allowed[c] = false,
                None => {}
            }
        }
    }
    if let Some(h) = home {
        allowed.iter_mut().for_each(|a| *a = false);
        allowed[h] = true;
    }
    Some(allowed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub moves: usize,
    pub degenerate: usize,
}

/// Resamples every unlabeled point once, in a fresh random order.
pub fn gibbs_sweep<K: Kernel, R: Rng + ?Sized>(
    state: &mut ClusterState,
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
    rng: &mut R,
) -> Result<SweepStats> {
    let mut order: Vec<usize> = (0..data.len())
        .filter(|i| constraints.class_of(*i).is_none())
        .collect();
    order.shuffle(rng);
    let mut stats = SweepStats::default();
    for point in order {
        gibbs_move(
            state,
            data,
            kernel,
            temperature,
            constraints,
            point,
            rng,
            &mut stats,
        )?;
    }
    debug_assert!(
        constraints.satisfied_by(&state.partition()),
        "Gibbs sweep broke the label constraints"
    );
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn gibbs_move<K: Kernel, R: Rng + ?Sized>(
    state: &mut ClusterState,
    data: &DataSet,
    kernel: &K,
    temperature: f64,
    constraints: &LabelConstraints,
    point: usize,
    rng: &mut R,
    stats: &mut SweepStats,
) -> Result<()> {
    state.detach(data, kernel, point)?;
    let cond = gibbs_conditional(state, data, point, kernel, temperature, constraints);
    stats.degenerate += cond.degenerate;
    state.note_degenerate(cond.degenerate as u64);
    let choice = sample_log_categorical(&cond.log_weights, rng)
        .ok_or_else(|| Error::input(format!("no admissible cluster for point {point}")))?;
    if choice == state.num_clusters() {
        let x = data.point(point);
        state.attach_projected(data, kernel, point, Target::New, &[], kernel.eval(x, x))?;
    } else {
        state.attach_projected(
            data,
            kernel,
            point,
            Target::Existing(choice),
            &cond.projections[choice],
            cond.schur[choice],
        )?;
    }
    stats.moves += 1;
    Ok(())
}
