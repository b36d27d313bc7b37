//! Determinantal clustering process (DCP).
//!
//! A probability measure over set partitions whose density is the product of
//! inverse kernel Gram determinants of the clusters, raised to a temperature.
//! This crate provides the model pieces and the inference machinery:
//!
//! * [`kernel`]: squared-exponential and delta kernels, Gram matrices, datasets.
//! * [`linalg`]: Cholesky log-determinants and incremental inverse updates.
//! * [`partition`]: canonical partitions, label constraints, cluster caches,
//!   the partition log-likelihood.
//! * [`sampler`]: Gibbs sweeps over partitions, exchange updates for the kernel
//!   hyperparameters and temperature, and an exact enumeration posterior.
//! * [`metrics`]: ARI/NMI, a k-means baseline and posterior summaries.
//! * [`io`]: CSV ingestion, synthetic scenarios, trace and config formats.

pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use kernel::{DataSet, Kernel, KernelFamily, KernelParams};
pub use linalg::{LinalgError, Matrix, PdCache};
pub use partition::{ClusterState, LabelConstraints, Partition};
pub use sampler::{PosteriorTrace, SamplerConfig};
