//! Exchange-algorithm updates for kernel hyperparameters and temperature.
//!
//! The partition likelihood has an intractable normalizer. The exchange
//! step draws an auxiliary partition from the model at the proposed
//! parameters, under the same label constraints as the observed partition;
//! in the acceptance ratio the normalizers of the observed and auxiliary
//! likelihoods cancel.
//!
//! Priors and proposals are expressed on the log-parameter scale, so a
//! Gaussian random walk there is symmetric and drops out of the ratio.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::{DataSet, KernelParams};
use crate::linalg::PdCache;
use crate::partition::{ClusterState, LabelConstraints, Partition, LOG_ZERO};
use crate::sampler::exact::sample_exact;
use crate::sampler::gibbs::gibbs_sweep;
use crate::sampler::{initial_partition, InitMode};

/// Prior over kernel parameters and temperature.
pub trait HyperPrior {
    /// Log-density with respect to the measure the proposal is symmetric
    /// in; [`LOG_ZERO`] outside the support.
    fn log_density(&self, params: &KernelParams) -> f64;
}

/// Proposal over kernel parameters and temperature. Implementations must be
/// symmetric, `q(ψ → ψ′) = q(ψ′ → ψ)`, in the same measure the prior uses.
pub trait Proposal {
    fn propose<R: Rng + ?Sized>(&self, current: &KernelParams, rng: &mut R) -> KernelParams;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub location: f64,
    pub scale: f64,
}

impl Default for LogNormal {
    fn default() -> Self {
        Self {
            location: 0.0,
            scale: 1.0,
        }
    }
}

impl LogNormal {
    /// Normal log-density of `log_value`.
    fn log_density_of_log(&self, log_value: f64) -> f64 {
        let z = (log_value - self.location) / self.scale;
        -0.5 * z * z - self.scale.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Independent log-normal priors. `kernel` holds one entry per lengthscale,
/// or a single entry shared by all of them (also used for the delta value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub kernel: Vec<LogNormal>,
    pub temperature: LogNormal,
}

impl Default for LogNormalPrior {
    fn default() -> Self {
        Self {
            kernel: vec![LogNormal::default()],
            temperature: LogNormal::default(),
        }
    }
}

impl LogNormalPrior {
    pub fn validate(&self) -> Result<()> {
        let bad = self
            .kernel
            .iter()
            .chain(std::iter::once(&self.temperature))
            .any(|p| !(p.scale > 0.0 && p.scale.is_finite() && p.location.is_finite()));
        if bad || self.kernel.is_empty() {
            return Err(crate::Error::input(
                "prior scales must be positive and locations finite, with at least one kernel entry",
            ));
        }
        Ok(())
    }
}

impl HyperPrior for LogNormalPrior {
    fn log_density(&self, params: &KernelParams) -> f64 {
        let v = params.log_vector();
        let (kernel, temp) = v.split_at(v.len() - 1);
        let per_kernel = |i: usize| {
            if self.kernel.len() == 1 {
                &self.kernel[0]
            } else {
                &self.kernel[i]
            }
        };
        if self.kernel.len() != 1 && self.kernel.len() != kernel.len() {
            return LOG_ZERO;
        }
        let mut lp = self.temperature.log_density_of_log(temp[0]);
        for (i, lv) in kernel.iter().enumerate() {
            lp += per_kernel(i).log_density_of_log(*lv);
        }
        lp
    }
}

/// Gaussian random walk on the log of every positive hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRandomWalk {
    pub step: f64,
    pub sample_temperature: bool,
}

impl Proposal for LogRandomWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &KernelParams, rng: &mut R) -> KernelParams {
        let normal = Normal::new(0.0, self.step).expect("step is positive");
        let mut v = current.log_vector();
        let last = v.len() - 1;
        for (i, x) in v.iter_mut().enumerate() {
            if i == last && !self.sample_temperature {
                continue;
            }
            *x += normal.sample(rng);
        }
        current.with_log_vector(&v)
    }
}

/// How the auxiliary partition is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxiliaryDraw {
    /// Datasets with fewer points than this are sampled exactly by enumeration.
    pub exact_threshold: usize,
    /// Gibbs sweeps otherwise, starting from label anchors with every
    /// unlabeled point alone.
    pub sweeps: usize,
    pub rebuild_interval: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    pub params: KernelParams,
    pub accepted: bool,
    /// Log acceptance ratio; [`LOG_ZERO`] for proposals outside the support
    /// or with numerically unusable Gram matrices.
    pub log_ratio: f64,
}

/// Sum of cluster log-determinants, with one jittered retry per cluster.
fn log_det_of(data: &DataSet, params: &KernelParams, p: &Partition) -> Option<f64> {
    let mut total = 0.0;
    for members in p.clusters() {
        let (cache, _) = PdCache::rebuild(&data.gram_sym(params, &members)).ok()?;
        total += cache.log_det();
    }
    Some(total)
}

/// Draws from the model at `params` restricted to `constraints`.
pub fn draw_auxiliary<R: Rng + ?Sized>(
    data: &DataSet,
    params: &KernelParams,
    constraints: &LabelConstraints,
    aux: &AuxiliaryDraw,
    rng: &mut R,
) -> Result<Partition> {
    if data.len() < aux.exact_threshold {
        return sample_exact(data, params, params.temperature, constraints, rng);
    }
    let init = initial_partition(data.len(), constraints, InitMode::Singletons, rng);
    let mut state = ClusterState::with_rebuild_interval(data, params, &init, aux.rebuild_interval)?;
    for _ in 0..aux.sweeps {
        gibbs_sweep(
            &mut state,
            data,
            params,
            params.temperature,
            constraints,
            rng,
        )?;
    }
    Ok(state.partition())
}

/// One exchange step for `(kernel parameters, temperature)` given the
/// current partition, which must satisfy `constraints`.
#[allow(clippy::too_many_arguments)]
pub fn exchange_update<P, Q, R>(
    data: &DataSet,
    current: &KernelParams,
    partition: &Partition,
    constraints: &LabelConstraints,
    prior: &P,
    proposal: &Q,
    aux: &AuxiliaryDraw,
    rng: &mut R,
) -> Result<ExchangeOutcome>
where
    P: HyperPrior + ?Sized,
    Q: Proposal + ?Sized,
    R: Rng + ?Sized,
{
    let proposed = proposal.propose(current, rng);
    let reject = |log_ratio: f64| ExchangeOutcome {
        params: current.clone(),
        accepted: false,
        log_ratio,
    };
    if proposed.validate().is_err() {
        return Ok(reject(LOG_ZERO));
    }
    let lp_new = prior.log_density(&proposed);
    let lp_cur = prior.log_density(current);
    if lp_new == LOG_ZERO || lp_new.is_nan() {
        return Ok(reject(LOG_ZERO));
    }

    let aux_partition = draw_auxiliary(data, &proposed, constraints, aux, rng)?;

    let (t_cur, t_new) = (current.temperature, proposed.temperature);
    let ld_s_cur = log_det_of(data, current, partition);
    let ld_s_new = log_det_of(data, &proposed, partition);
    let ld_a_cur = log_det_of(data, current, &aux_partition);
    let ld_a_new = log_det_of(data, &proposed, &aux_partition);
    let (Some(ld_s_cur), Some(ld_s_new), Some(ld_a_cur), Some(ld_a_new)) =
        (ld_s_cur, ld_s_new, ld_a_cur, ld_a_new)
    else {
        return Ok(reject(LOG_ZERO));
    };

    // p̃(S|ψ′)/p̃(S|ψ) · p̃(S′|ψ)/p̃(S′|ψ′) · p(ψ′)/p(ψ)
    let observed = (-t_new * ld_s_new) - (-t_cur * ld_s_cur);
    let auxiliary = (-t_cur * ld_a_cur) - (-t_new * ld_a_new);
    let log_ratio = observed + auxiliary + (lp_new - lp_cur);

    let accepted = if log_ratio >= 0.0 {
        true
    } else if log_ratio.is_nan() {
        false
    } else {
        rng.random::<f64>() < log_ratio.exp()
    };
    Ok(ExchangeOutcome {
        params: if accepted { proposed } else { current.clone() },
        accepted,
        log_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Stay;
    impl Proposal for Stay {
        fn propose<R: Rng + ?Sized>(&self, current: &KernelParams, _: &mut R) -> KernelParams {
            current.clone()
        }
    }

    struct Jump(KernelParams);
    impl Proposal for Jump {
        fn propose<R: Rng + ?Sized>(&self, _: &KernelParams, _: &mut R) -> KernelParams {
            self.0.clone()
        }
    }

    struct OnlyAt(KernelParams);
    impl HyperPrior for OnlyAt {
        fn log_density(&self, params: &KernelParams) -> f64 {
            if *params == self.0 {
                0.0
            } else {
                LOG_ZERO
            }
        }
    }

    fn toy() -> (DataSet, Partition) {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.4, 0.1],
            vec![2.0, 1.0],
            vec![2.2, 0.7],
            vec![1.0, 3.0],
        ];
        (
            DataSet::from_rows(rows).unwrap(),
            Partition::from_assignment(&[0, 0, 1, 1, 2]),
        )
    }

    #[test]
    fn identical_proposal_always_accepted() {
        let (data, s) = toy();
        let params = KernelParams::squared_exponential(vec![0.7, 1.3], 1.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for threshold in [0, 10] {
            let aux = AuxiliaryDraw {
                exact_threshold: threshold,
                sweeps: 3,
                rebuild_interval: 64,
            };
            for _ in 0..50 {
                let out = exchange_update(
                    &data,
                    &params,
                    &s,
                    &LabelConstraints::none(),
                    &LogNormalPrior::default(),
                    &Stay,
                    &aux,
                    &mut rng,
                )
                .unwrap();
                assert!(out.accepted);
                assert_eq!(out.log_ratio, 0.0);
            }
        }
    }

    #[test]
    fn zero_prior_never_accepted() {
        let (data, s) = toy();
        let params = KernelParams::squared_exponential(vec![1.0, 1.0], 1.0).unwrap();
        let elsewhere = KernelParams::squared_exponential(vec![2.0, 2.0], 1.0).unwrap();
        let aux = AuxiliaryDraw {
            exact_threshold: 10,
            sweeps: 0,
            rebuild_interval: 64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let out = exchange_update(
                &data,
                &params,
                &s,
                &LabelConstraints::none(),
                &OnlyAt(params.clone()),
                &Jump(elsewhere.clone()),
                &aux,
                &mut rng,
            )
            .unwrap();
            assert!(!out.accepted);
            assert_eq!(out.params, params);
        }
    }

    #[test]
    fn auxiliary_draws_respect_labels() {
        let rows = vec![
            vec![0.0],
            vec![0.2],
            vec![3.0],
            vec![3.1],
            vec![1.5],
            vec![9.0],
        ];
        let labels: Vec<Option<String>> = ["a", "a", "b", "", "", "b"]
            .iter()
            .map(|l| (!l.is_empty()).then(|| l.to_string()))
            .collect();
        let data = DataSet::new(rows, labels).unwrap();
        let c = LabelConstraints::from_labels(data.labels());
        let params = KernelParams::squared_exponential(vec![1.0], 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for threshold in [0, 10] {
            let aux = AuxiliaryDraw {
                exact_threshold: threshold,
                sweeps: 4,
                rebuild_interval: 64,
            };
            for _ in 0..50 {
                let s = draw_auxiliary(&data, &params, &c, &aux, &mut rng).unwrap();
                assert!(c.satisfied_by(&s));
            }
        }
    }

    #[test]
    fn frozen_temperature_walk() {
        let walk = LogRandomWalk {
            step: 0.5,
            sample_temperature: false,
        };
        let p = KernelParams::squared_exponential(vec![1.0, 2.0], 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = walk.propose(&p, &mut rng);
        assert_eq!(q.temperature, p.temperature);
        assert_ne!(q.family, p.family);
    }

    #[test]
    fn lognormal_prior_density() {
        let prior = LogNormalPrior::default();
        let p = KernelParams::squared_exponential(vec![1.0], 1.0).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).ln();
        assert!((prior.log_density(&p) - expected).abs() < 1e-12);
        let mismatched = LogNormalPrior {
            kernel: vec![LogNormal::default(); 3],
            ..Default::default()
        };
        assert_eq!(mismatched.log_density(&p), LOG_ZERO);
    }
}
