//! Online inference: minibatch latent sweeps feeding streaming sufficient
//! statistics, with conjugate parameter refreshes between minibatches.
//!
//! Each iteration draws latent counts for a uniformly chosen minibatch of
//! one-entries (and of observed edges, per network), folds the resulting
//! allocation counts into streaming sufficient statistics, and refreshes
//! the model parameters from the same conjugate conditionals the batch
//! sampler uses. Two knobs control the statistics update `s ← ρ·s + w·inc`:
//!
//! * `reweight` scales the minibatch increment by `w = nnz / |I_t|`
//!   (per network, observed edges over edge-minibatch size) so that each
//!   increment estimates the full-data statistics without bias.
//! * `decay` is the retention factor `ρ ∈ [0, 1]` applied to the previous
//!   statistics. `ρ = 1` accumulates forever; `ρ = 0` keeps only the
//!   current increment.
//!
//! When `decay` is not set explicitly, [`MinibatchSpec::effective_decay`]
//! picks `ρ = 0` with reweighting on and `ρ = 1` with reweighting off.
//! The reason: reweighted increments are already at full-data scale, so
//! accumulating them across repeated passes over a fixed data set inflates
//! the statistics without bound (each pass adds another full-data copy,
//! and the latent counts grow with the inflated weights, compounding the
//! growth). Dropping the old statistics each refresh keeps the conditional
//! at full-data scale and stationary. Plain accumulation (`ρ = 1`) is the
//! right choice for single-pass streaming, where each entry arrives once
//! and unweighted counts build up to the full-data statistics.

use crate::chain::{
    active_components, ChainOutput, ParamsSnapshot, ProgressRecord, RunningMean,
    ACTIVE_WEIGHT_FRACTION,
};
use crate::error::{Error, Result};
use crate::gibbs::{
    beta_posterior, draw_allocation, factor_column_posterior, h_posterior, lambda_posterior,
    p_posterior, sample_beta, sample_factor_column, sample_hr, sample_lambda, sample_pr,
    train_log_likelihood,
};
use crate::model::{
    network_rate_terms, rate_terms, Hyperparams, LatentState, ModelState, SuffStats, TrainData,
};
use crate::rng::{streams, RngHandle};
use rand::Rng as _;

/// How the per-minibatch parameter refresh summarizes each conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMode {
    /// Set each parameter to the analytic mean of its conditional
    /// (deterministic given the statistics). The default.
    AnalyticMean,
    /// Draw `m_samples` values from each conditional and store their
    /// average. With one sample this reproduces a batch parameter sweep.
    SampleAverage,
}

/// Minibatch schedule and refresh settings for the online sampler.
#[derive(Debug, Clone)]
pub struct MinibatchSpec {
    /// One-entries drawn per iteration, `1 ..= nnz`.
    pub batch: usize,
    /// Edges drawn per iteration for each attached network, in network
    /// order; `1 ..= edge_count`, or exactly 0 for an edgeless network.
    pub net_batch: Vec<usize>,
    /// Scale increments to full-data scale (`w = nnz / batch`).
    pub reweight: bool,
    /// Draws per conditional in [`SummaryMode::SampleAverage`] mode.
    pub m_samples: usize,
    /// Refresh summary; see [`SummaryMode`].
    pub summary: SummaryMode,
    /// Retention factor `ρ ∈ [0, 1]` for previous statistics, or `None`
    /// to derive it from `reweight` (see the module docs).
    pub decay: Option<f64>,
}

impl MinibatchSpec {
    /// A conventional schedule: one tenth of the one-entries (at least
    /// one) and one tenth of each network's edges per iteration, with
    /// reweighting on and analytic-mean refreshes.
    pub fn tenth(data: &TrainData) -> Self {
        MinibatchSpec {
            batch: (data.tensor.nnz() / 10).max(1).min(data.tensor.nnz().max(1)),
            net_batch: data
                .networks
                .iter()
                .map(|n| {
                    if n.edge_count() == 0 {
                        0
                    } else {
                        (n.edge_count() / 10).max(1)
                    }
                })
                .collect(),
            reweight: true,
            m_samples: 1,
            summary: SummaryMode::AnalyticMean,
            decay: None,
        }
    }

    /// The retention factor actually applied: the explicit `decay` if
    /// set, else 0 with reweighting on and 1 with reweighting off.
    pub fn effective_decay(&self) -> f64 {
        self.decay.unwrap_or(if self.reweight { 0.0 } else { 1.0 })
    }

    /// Check the schedule against a data set.
    pub fn validate(&self, data: &TrainData) -> Result<()> {
        let nnz = data.tensor.nnz();
        if self.batch == 0 || self.batch > nnz {
            return Err(Error::Config(format!(
                "tensor minibatch size must lie in 1..={} (got {})",
                nnz, self.batch
            )));
        }
        if self.net_batch.len() != data.networks.len() {
            return Err(Error::Config(format!(
                "need one edge-minibatch size per network ({} networks, {} sizes)",
                data.networks.len(),
                self.net_batch.len()
            )));
        }
        for (net, &b) in data.networks.iter().zip(&self.net_batch) {
            let edges = net.edge_count();
            if edges == 0 {
                if b != 0 {
                    return Err(Error::Config(format!(
                        "mode-{} network has no edges; its minibatch size must be 0",
                        net.mode
                    )));
                }
            } else if b == 0 || b > edges {
                return Err(Error::Config(format!(
                    "mode-{} network minibatch size must lie in 1..={} (got {})",
                    net.mode, edges, b
                )));
            }
        }
        if self.m_samples == 0 {
            return Err(Error::Config("refresh sample count must be at least 1".into()));
        }
        if let Some(rho) = self.decay {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::Config(format!(
                    "decay must lie in [0, 1], got {rho}"
                )));
            }
        }
        Ok(())
    }
}

/// Draw `take` distinct positions uniformly from `0..population`,
/// returned sorted. Deterministic given `(seed, iteration, which)`.
///
/// `which` keys the substream: 0 for the tensor minibatch, `1 + i` for
/// network `i`'s edge minibatch.
pub fn select_minibatch(
    seed: u64,
    iteration: u64,
    which: u64,
    population: usize,
    take: usize,
) -> Vec<usize> {
    assert!(take <= population, "cannot take {take} of {population}");
    if take == 0 {
        return Vec::new();
    }
    let mut pool: Vec<usize> = (0..population).collect();
    let mut rng = RngHandle::substream(seed, streams::MINIBATCH, iteration, which);
    // Partial Fisher-Yates: after i swaps the prefix holds a uniform
    // without-replacement sample of size i.
    for i in 0..take.min(population - 1) {
        let j = rng.gen_range(i..population);
        pool.swap(i, j);
    }
    pool.truncate(take);
    pool.sort_unstable();
    pool
}

/// Fold a minibatch increment into streaming sufficient statistics:
/// every tensor statistic becomes `ρ·old + w_tensor·inc`, and network
/// `i`'s statistics become `ρ·old + w_net[i]·inc`.
pub fn update_suffstats_streaming(
    suff: &mut SuffStats,
    increment: &SuffStats,
    w_tensor: f64,
    w_net: &[f64],
    rho: f64,
) {
    assert_eq!(suff.s_mode.len(), increment.s_mode.len(), "mode count mismatch");
    assert_eq!(suff.v_node.len(), increment.v_node.len(), "network count mismatch");
    assert_eq!(w_net.len(), suff.v_node.len(), "need one weight per network");
    for (dst, src) in suff.s_mode.iter_mut().zip(&increment.s_mode) {
        assert_eq!(dst.len(), src.len(), "mode statistic shape mismatch");
        for (d, &v) in dst.iter_mut().zip(src) {
            *d = rho * *d + w_tensor * v;
        }
    }
    for (d, &v) in suff.s_total.iter_mut().zip(&increment.s_total) {
        *d = rho * *d + w_tensor * v;
    }
    for (ni, (dst, src)) in suff.v_node.iter_mut().zip(&increment.v_node).enumerate() {
        assert_eq!(dst.len(), src.len(), "network statistic shape mismatch");
        for (d, &v) in dst.iter_mut().zip(src) {
            *d = rho * *d + w_net[ni] * v;
        }
    }
    for (ni, (dst, src)) in suff.v_total.iter_mut().zip(&increment.v_total).enumerate() {
        for (d, &v) in dst.iter_mut().zip(src) {
            *d = rho * *d + w_net[ni] * v;
        }
    }
}

/// Draw latent counts for the selected entries and edges only, returning
/// the raw (unweighted) allocation counts as a [`SuffStats`] increment
/// plus the number of floored-rate events.
///
/// Entry `n`'s draw comes from the same per-cell random substream the
/// batch sweep uses, so a full minibatch reproduces the batch sweep
/// exactly. Updates `latent` in place at the visited positions.
fn minibatch_increment(
    seed: u64,
    iteration: u64,
    data: &TrainData,
    state: &ModelState,
    entries: &[usize],
    edges: &[Vec<usize>],
    latent: &mut LatentState,
) -> (SuffStats, u64) {
    let rank = state.hyper.rank;
    let tensor = &data.tensor;
    let mut inc = SuffStats::zeroed(tensor.shape(), rank, &data.networks);
    let mut floored = 0u64;
    let mut terms = vec![0.0; rank];
    let mut zeta = vec![0.0; rank];
    let mut alloc: Vec<u64> = Vec::new();

    for &n in entries {
        let index = tensor.one(n);
        let mut rng =
            RngHandle::substream(seed, streams::TENSOR_LATENTS, iteration, tensor.linear(index));
        rate_terms(index, &state.factors, &state.weights, &mut terms);
        let (count, fl) = draw_allocation(&mut rng, &terms, &mut zeta, &mut alloc);
        latent.y[n] = count;
        floored += fl as u64;
        for (k, &coord) in index.iter().enumerate() {
            let row = &mut inc.s_mode[k][coord * rank..(coord + 1) * rank];
            for (slot, &a) in row.iter_mut().zip(&alloc) {
                *slot += a as f64;
            }
        }
        for (slot, &a) in inc.s_total.iter_mut().zip(&alloc) {
            *slot += a as f64;
        }
    }

    for (ni, net) in data.networks.iter().enumerate() {
        let factor = &state.factors[net.mode_axis()];
        let nw = &state.net_weights[ni];
        let all_edges: Vec<(usize, usize)> = net.edges().collect();
        for &e in &edges[ni] {
            let (i, j) = all_edges[e];
            let edge_id = ((ni as u64) << 48) | (i * net.size + j) as u64;
            let mut rng = RngHandle::substream(seed, streams::NETWORK_LATENTS, iteration, edge_id);
            network_rate_terms(i, j, factor, nw, &mut terms);
            let (count, fl) = draw_allocation(&mut rng, &terms, &mut zeta, &mut alloc);
            latent.x[ni][e] = count;
            floored += fl as u64;
            for (slot, &a) in inc.v_node[ni][i * rank..(i + 1) * rank].iter_mut().zip(&alloc) {
                *slot += a as f64;
            }
            if i != j {
                for (slot, &a) in inc.v_node[ni][j * rank..(j + 1) * rank].iter_mut().zip(&alloc) {
                    *slot += a as f64;
                }
            }
            for (slot, &a) in inc.v_total[ni].iter_mut().zip(&alloc) {
                *slot += a as f64;
            }
        }
    }
    (inc, floored)
}

/// For each mode axis, the index of the attached network, if any.
fn network_by_axis(data: &TrainData) -> Vec<Option<usize>> {
    let mut map = vec![None; data.tensor.order()];
    for (i, net) in data.networks.iter().enumerate() {
        map[net.mode_axis()] = Some(i);
    }
    map
}

/// Refresh every parameter from its conditional given the current
/// streaming statistics.
///
/// Analytic-mean mode stores each conditional's mean (Dirichlet means
/// stay on the simplex; the weight means plug in the freshly refreshed
/// odds parameter). Sample-average mode draws `m_samples` values per
/// conditional, in the same order and from the same substreams as a
/// batch parameter sweep, and stores their average.
fn refresh_params(seed: u64, iteration: u64, data: &TrainData, state: &mut ModelState, spec: &MinibatchSpec) {
    let rank = state.hyper.rank;
    let by_axis = network_by_axis(data);
    match spec.summary {
        SummaryMode::AnalyticMean => {
            for (axis, &net_index) in by_axis.iter().enumerate() {
                let rows = state.factors[axis].rows();
                for r in 0..rank {
                    let s = &state.suff.s_mode[axis];
                    let s_col: Vec<f64> = (0..rows).map(|j| s[j * rank + r]).collect();
                    let v_col: Option<Vec<f64>> = net_index.map(|ni| {
                        let v = &state.suff.v_node[ni];
                        (0..rows).map(|j| v[j * rank + r]).collect()
                    });
                    let params =
                        factor_column_posterior(state.hyper.a[axis], &s_col, v_col.as_deref());
                    let total: f64 = params.iter().sum();
                    let mean: Vec<f64> = params.iter().map(|&x| x / total).collect();
                    state.factors[axis].set_column(r, &mean);
                }
            }
            for r in 0..rank {
                let (a, b) = p_posterior(
                    state.hyper.c,
                    state.hyper.epsilon,
                    state.hyper.g[r],
                    state.suff.s_total[r],
                );
                let p_r = a / (a + b);
                let (shape, scale) = lambda_posterior(state.hyper.g[r], state.suff.s_total[r], p_r);
                state.weights.p[r] = p_r;
                state.weights.lambda[r] = shape * scale;
            }
            for ni in 0..data.networks.len() {
                for r in 0..rank {
                    let (a, b) = h_posterior(
                        state.hyper.d,
                        state.hyper.alpha,
                        state.hyper.f[r],
                        state.suff.v_total[ni][r],
                    );
                    let h_r = a / (a + b);
                    let (shape, scale) =
                        beta_posterior(state.hyper.f[r], state.suff.v_total[ni][r], h_r);
                    state.net_weights[ni].h[r] = h_r;
                    state.net_weights[ni].beta[r] = shape * scale;
                }
            }
        }
        SummaryMode::SampleAverage => {
            let m = spec.m_samples;
            let mut factor_sum: Vec<Vec<f64>> = state
                .factors
                .iter()
                .map(|f| vec![0.0; f.rows() * rank])
                .collect();
            let mut p_sum = vec![0.0; rank];
            let mut lambda_sum = vec![0.0; rank];
            let mut h_sum: Vec<Vec<f64>> = data.networks.iter().map(|_| vec![0.0; rank]).collect();
            let mut beta_sum: Vec<Vec<f64>> = data.networks.iter().map(|_| vec![0.0; rank]).collect();
            for draw in 0..m {
                let mut rng = RngHandle::substream(seed, streams::FACTORS, iteration, draw as u64);
                for (axis, &net_index) in by_axis.iter().enumerate() {
                    for r in 0..rank {
                        let column = sample_factor_column(&mut rng, state, axis, r, net_index);
                        for (j, &v) in column.iter().enumerate() {
                            factor_sum[axis][j * rank + r] += v;
                        }
                    }
                }
                let mut rng = RngHandle::substream(seed, streams::WEIGHTS, iteration, draw as u64);
                for r in 0..rank {
                    let p_r = sample_pr(&mut rng, state, r);
                    let l_r = sample_lambda(&mut rng, state, r, p_r);
                    p_sum[r] += p_r;
                    lambda_sum[r] += l_r;
                }
                for ni in 0..data.networks.len() {
                    for r in 0..rank {
                        let h_r = sample_hr(&mut rng, state, ni, r);
                        let b_r = sample_beta(&mut rng, state, ni, r, h_r);
                        h_sum[ni][r] += h_r;
                        beta_sum[ni][r] += b_r;
                    }
                }
            }
            let inv = 1.0 / m as f64;
            for (axis, sum) in factor_sum.into_iter().enumerate() {
                let rows = state.factors[axis].rows();
                for r in 0..rank {
                    let column: Vec<f64> = (0..rows).map(|j| sum[j * rank + r] * inv).collect();
                    state.factors[axis].set_column(r, &column);
                }
            }
            for r in 0..rank {
                state.weights.p[r] = p_sum[r] * inv;
                state.weights.lambda[r] = lambda_sum[r] * inv;
            }
            for ni in 0..data.networks.len() {
                for r in 0..rank {
                    state.net_weights[ni].h[r] = h_sum[ni][r] * inv;
                    state.net_weights[ni].beta[r] = beta_sum[ni][r] * inv;
                }
            }
        }
    }
}

/// One online iteration: select minibatches, sweep their latents, fold
/// the counts into the streaming statistics, refresh the parameters.
///
/// Returns the floored-rate event count and the tensor reweight factor
/// applied this iteration. Cost is linear in the minibatch sizes (plus
/// the parameter refresh), independent of total nnz.
pub fn cdf_iteration(
    seed: u64,
    iteration: u64,
    data: &TrainData,
    state: &mut ModelState,
    latent: &mut LatentState,
    spec: &MinibatchSpec,
) -> (u64, f64) {
    let nnz = data.tensor.nnz();
    let entries = select_minibatch(seed, iteration, 0, nnz, spec.batch);
    let edges: Vec<Vec<usize>> = data
        .networks
        .iter()
        .enumerate()
        .map(|(ni, net)| {
            select_minibatch(seed, iteration, 1 + ni as u64, net.edge_count(), spec.net_batch[ni])
        })
        .collect();

    let (inc, floored) = minibatch_increment(seed, iteration, data, state, &entries, &edges, latent);

    let w_tensor = if spec.reweight {
        nnz as f64 / spec.batch as f64
    } else {
        1.0
    };
    let w_net: Vec<f64> = data
        .networks
        .iter()
        .zip(&spec.net_batch)
        .map(|(net, &b)| {
            if spec.reweight && b > 0 {
                net.edge_count() as f64 / b as f64
            } else {
                1.0
            }
        })
        .collect();
    update_suffstats_streaming(&mut state.suff, &inc, w_tensor, &w_net, spec.effective_decay());
    refresh_params(seed, iteration, data, state, spec);
    (floored, w_tensor)
}

/// Run an online chain.
///
/// Same schedule, output, and reproducibility contract as the batch
/// runner; each progress record additionally carries the minibatch
/// ordinal and the applied reweight factor.
#[allow(clippy::too_many_arguments)]
pub fn run_online_chain(
    seed: u64,
    data: &TrainData,
    hyper: &Hyperparams,
    spec: &MinibatchSpec,
    iters: usize,
    burnin: usize,
    thin: usize,
    mut on_progress: impl FnMut(&ProgressRecord),
) -> Result<ChainOutput> {
    if iters <= burnin {
        return Err(Error::Config(format!(
            "iterations ({iters}) must exceed burn-in ({burnin})"
        )));
    }
    if thin == 0 {
        return Err(Error::Config("thinning interval must be at least 1".into()));
    }
    spec.validate(data)?;
    let tensor = &data.tensor;
    let mut state = ModelState::init(seed, hyper, tensor.shape(), &data.networks)?;
    let mut latent = LatentState::ones_for(tensor, &data.networks);

    let mut samples = Vec::new();
    let mut mean = RunningMean::new();
    let mut progress = Vec::with_capacity(iters);
    let mut floored_total = 0u64;

    for it in 1..=iters {
        let (floored, w) = cdf_iteration(seed, it as u64, data, &mut state, &mut latent, spec);
        floored_total += floored;
        let record = ProgressRecord {
            iteration: it,
            train_ll: train_log_likelihood(seed, it as u64, data, &state),
            active_components: active_components(&state.weights.lambda, ACTIVE_WEIGHT_FRACTION),
            minibatch: Some(it),
            reweight: Some(w),
        };
        on_progress(&record);
        progress.push(record);
        if it > burnin {
            mean.add(&state);
            if (it - burnin - 1).is_multiple_of(thin) {
                samples.push(ParamsSnapshot::from_state(&state));
            }
        }
    }

    Ok(ChainOutput {
        shape: tensor.shape().to_vec(),
        network_modes: data.networks.iter().map(|n| (n.mode, n.size)).collect(),
        rank: hyper.rank,
        seed,
        iters,
        burnin,
        thin,
        samples,
        mean: mean.finish()?,
        final_params: ParamsSnapshot::from_state(&state),
        final_suff: state.suff,
        progress,
        floored_rate_events: floored_total,
    })
}
