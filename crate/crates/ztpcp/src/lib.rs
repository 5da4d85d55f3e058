//! Bayesian CP decomposition of sparse binary tensors.
//!
//! A binary tensor entry is modeled as the indicator of a latent Poisson
//! count whose rate is a rank-`R` CP form: `rate(i) = Σ_r λ_r Π_k u^(k)[i_k, r]`,
//! so `P(entry = 1) = 1 − exp(−rate)`. Factor columns live on the simplex
//! (Dirichlet priors), component weights `λ_r` carry gamma priors whose
//! beta-distributed odds let unneeded components shrink toward zero, and
//! optional per-mode networks share the factors through a second Poisson
//! form on edges.
//!
//! Two inference engines are provided:
//!
//! * [`gibbs::run_chain`] — batch Gibbs sampling. Latent counts are drawn
//!   only at the observed one-entries (zeros contribute in closed form),
//!   so an iteration costs `O(nnz · R)` rather than `O(Π n_k)`.
//! * [`online::run_online_chain`] — online conditional-density filtering.
//!   Each step processes a minibatch of one-entries, folds reweighted
//!   sufficient statistics into a running summary, and refreshes the
//!   parameters from their closed-form conditionals.
//!
//! Supporting modules handle sparse tensor I/O ([`tensor`]), holdout
//! splits for tensor completion ([`tensor`]), checkpoint serialization
//! ([`checkpoint`]), ranking metrics ([`metrics`]), synthetic data
//! generation ([`synth`]), and the run configuration shared with the
//! `ztpcp` binary ([`config`]).
//!
//! The `examples/` directory demonstrates each capability end to end:
//! generating data, batch and online fitting, completion scoring,
//! cold-start prediction with a side network, and inspecting factors.

pub mod chain;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod gibbs;
pub mod metrics;
pub mod model;
pub mod online;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod tensor;

pub use chain::{ChainOutput, ParamsSnapshot, ProgressRecord};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{Hyperparams, ModelState};
pub use tensor::{ModeNetwork, SparseBinaryTensor, SplitSpec, TensorIndex};
