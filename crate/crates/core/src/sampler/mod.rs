//! Posterior inference: Gibbs sweeps over partitions alternating with
//! exchange updates of the hyperparameters.

pub mod exact;
pub mod exchange;
pub mod gibbs;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DataSet, KernelParams};
use crate::partition::{self, canonicalize, ClusterState, LabelConstraints, Partition};
use crate::rng::{stream, Stream};

pub use exact::{exact_posterior, ExactPosterior};
pub use exchange::{
    exchange_update, AuxiliaryDraw, ExchangeOutcome, HyperPrior, LogNormal, LogNormalPrior,
    LogRandomWalk, Proposal,
};
pub use gibbs::{gibbs_conditional, gibbs_sweep, log_sum_exp, sample_log_categorical, Conditional};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Each unlabeled point alone; labeled points grouped by label.
    Singletons,
    /// Each unlabeled point joins a uniformly chosen label group (or stays
    /// alone when nothing is labeled).
    RandomAnchors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Total iterations, burn-in included.
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub aux_sweeps: usize,
    pub exact_aux_threshold: usize,
    pub proposal_step: f64,
    pub rebuild_interval: usize,
    pub init_mode: InitMode,
    pub learn_hyperparameters: bool,
    pub sample_temperature: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_sweeps: 2000,
            burn_in: 500,
            thin: 1,
            seed: 0,
            aux_sweeps: 20,
            exact_aux_threshold: 8,
            proposal_step: 0.2,
            rebuild_interval: partition::DEFAULT_REBUILD_INTERVAL,
            init_mode: InitMode::Singletons,
            learn_hyperparameters: true,
            sample_temperature: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::input("thin must be at least 1"));
        }
        if !(self.proposal_step > 0.0 && self.proposal_step.is_finite()) {
            return Err(Error::input("proposal_step must be positive"));
        }
        if self.rebuild_interval == 0 {
            return Err(Error::input("rebuild_interval must be at least 1"));
        }
        Ok(())
    }

    /// Number of samples a run records.
    pub fn expected_samples(&self) -> usize {
        self.n_sweeps.saturating_sub(self.burn_in) / self.thin
    }

    fn aux(&self) -> AuxiliaryDraw {
        AuxiliaryDraw {
            exact_threshold: self.exact_aux_threshold,
            sweeps: self.aux_sweeps,
            rebuild_interval: self.rebuild_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub sweep: usize,
    pub partition: Partition,
    pub params: KernelParams,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorTrace {
    pub samples: Vec<TraceSample>,
    pub hyper_accept_count: u64,
    pub hyper_propose_count: u64,
    /// Schur complements that hit the degeneracy floor.
    pub degenerate_moves: u64,
    /// Cache rebuilds that needed diagonal jitter.
    pub jittered_rebuilds: u64,
}

impl PosteriorTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.hyper_propose_count == 0 {
            0.0
        } else {
            self.hyper_accept_count as f64 / self.hyper_propose_count as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Starting partition satisfying the label constraints.
pub fn initial_partition<R: Rng + ?Sized>(
    n: usize,
    constraints: &LabelConstraints,
    mode: InitMode,
    rng: &mut R,
) -> Partition {
    let classes = constraints.num_classes();
    let mut raw: Vec<usize> = (0..n).map(|i| classes + i).collect();
    for (&i, &c) in constraints
        .labeled_indices()
        .iter()
        .zip(constraints.classes())
    {
        raw[i] = c;
    }
    if mode == InitMode::RandomAnchors && classes > 0 {
        for (i, slot) in raw.iter_mut().enumerate() {
            if constraints.class_of(i).is_none() {
                *slot = rng.random_range(0..classes);
            }
        }
    }
    canonicalize(&raw)
}

/// Runs one chain: per iteration one Gibbs sweep, then one exchange update
/// when hyperparameters are learned. Deterministic given `config.seed`.
pub fn run_inference<P: HyperPrior + ?Sized>(
    data: &DataSet,
    params0: &KernelParams,
    prior: &P,
    config: &SamplerConfig,
) -> Result<PosteriorTrace> {
    config.validate()?;
    params0.validate()?;
    params0.check_dim(data.dim())?;

    let constraints = LabelConstraints::from_labels(data.labels());
    let mut chain_rng = stream(config.seed, Stream::Chain);
    let mut proposal_rng = stream(config.seed, Stream::Proposal);
    let walk = LogRandomWalk {
        step: config.proposal_step,
        sample_temperature: config.sample_temperature,
    };
    let aux = config.aux();

    let init = initial_partition(data.len(), &constraints, config.init_mode, &mut chain_rng);
    let mut params = params0.clone();
    let mut state =
        ClusterState::with_rebuild_interval(data, &params, &init, config.rebuild_interval)?;
    let mut trace = PosteriorTrace::default();
    let mut retired_degenerate = 0;
    let mut retired_jitter = 0;

    for sweep in 0..config.n_sweeps {
        gibbs_sweep(
            &mut state,
            data,
            &params,
            params.temperature,
            &constraints,
            &mut chain_rng,
        )?;
        if config.learn_hyperparameters {
            let outcome = exchange_update(
                data,
                &params,
                &state.partition(),
                &constraints,
                prior,
                &walk,
                &aux,
                &mut proposal_rng,
            )?;
            trace.hyper_propose_count += 1;
            if outcome.accepted {
                trace.hyper_accept_count += 1;
                if outcome.params != params {
                    params = outcome.params;
                    retired_degenerate += state.degenerate_count();
                    retired_jitter += state.jitter_count();
                    let p = state.partition();
                    state = ClusterState::with_rebuild_interval(
                        data,
                        &params,
                        &p,
                        config.rebuild_interval,
                    )?;
                }
            }
        }
        if sweep >= config.burn_in && (sweep - config.burn_in + 1).is_multiple_of(config.thin) {
            let partition = state.partition();
            let log_likelihood =
                partition::log_likelihood(&state, params.temperature, &constraints);
            trace.samples.push(TraceSample {
                sweep,
                partition,
                params: params.clone(),
                log_likelihood,
            });
        }
    }
    trace.degenerate_moves = retired_degenerate + state.degenerate_count();
    trace.jittered_rebuilds = retired_jitter + state.jitter_count();
    Ok(trace)
}

/// Independent chains, one per seed, run on separate threads.
pub fn run_chains<P: HyperPrior + Sync + ?Sized>(
    data: &DataSet,
    params0: &KernelParams,
    prior: &P,
    config: &SamplerConfig,
    seeds: &[u64],
) -> Vec<Result<PosteriorTrace>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = SamplerConfig {
                    seed,
                    ..config.clone()
                };
                scope.spawn(move || run_inference(data, params0, prior, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}
