//! Chain outputs: parameter snapshots, running means, progress records.

use crate::error::{Error, Result};
use crate::model::{FactorMatrix, GlobalWeights, ModelState, NetworkWeights, SuffStats};

/// Fraction of the largest component weight below which a component
/// counts as pruned in progress lines and rank reports.
pub const ACTIVE_WEIGHT_FRACTION: f64 = 1e-3;

/// Number of components whose weight exceeds `threshold * max(lambda)`.
pub fn active_components(lambda: &[f64], threshold: f64) -> usize {
    let max = lambda.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    lambda.iter().filter(|&&l| l > threshold * max).count()
}

/// The predictive parameters of one iteration: factor matrices plus all
/// component weights, without latent counts or statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsSnapshot {
    pub factors: Vec<FactorMatrix>,
    pub weights: GlobalWeights,
    pub net_weights: Vec<NetworkWeights>,
}

impl ParamsSnapshot {
    pub fn from_state(state: &ModelState) -> Self {
        ParamsSnapshot {
            factors: state.factors.clone(),
            weights: state.weights.clone(),
            net_weights: state.net_weights.clone(),
        }
    }
}

/// Element-wise running mean over a stream of parameter states.
#[derive(Debug, Clone)]
pub struct RunningMean {
    count: usize,
    sum: Option<ParamsSnapshot>,
}

impl RunningMean {
    pub fn new() -> Self {
        RunningMean { count: 0, sum: None }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Fold one state into the mean.
    pub fn add(&mut self, state: &ModelState) {
        self.count += 1;
        match &mut self.sum {
            None => self.sum = Some(ParamsSnapshot::from_state(state)),
            Some(sum) => {
                for (acc, fm) in sum.factors.iter_mut().zip(&state.factors) {
                    let rank = acc.rank();
                    for j in 0..acc.rows() {
                        for r in 0..rank {
                            let v = acc.get(j, r) + fm.get(j, r);
                            // set via column API would be O(rows); write rows directly
                            acc.set_entry(j, r, v);
                        }
                    }
                }
                for (acc, &v) in sum.weights.lambda.iter_mut().zip(&state.weights.lambda) {
                    *acc += v;
                }
                for (acc, &v) in sum.weights.p.iter_mut().zip(&state.weights.p) {
                    *acc += v;
                }
                for (accw, nw) in sum.net_weights.iter_mut().zip(&state.net_weights) {
                    for (acc, &v) in accw.beta.iter_mut().zip(&nw.beta) {
                        *acc += v;
                    }
                    for (acc, &v) in accw.h.iter_mut().zip(&nw.h) {
                        *acc += v;
                    }
                }
            }
        }
    }

    /// The mean of everything added so far.
    ///
    /// Fails if nothing was added (no post-burn-in iterations).
    pub fn finish(self) -> Result<ParamsSnapshot> {
        let mut mean = self
            .sum
            .ok_or_else(|| Error::Config("no post-burn-in iterations to average".into()))?;
        let n = self.count as f64;
        for fm in &mut mean.factors {
            fm.scale(1.0 / n);
        }
        for v in &mut mean.weights.lambda {
            *v /= n;
        }
        for v in &mut mean.weights.p {
            *v /= n;
        }
        for nw in &mut mean.net_weights {
            for v in &mut nw.beta {
                *v /= n;
            }
            for v in &mut nw.h {
                *v /= n;
            }
        }
        Ok(mean)
    }
}

impl Default for RunningMean {
    fn default() -> Self {
        Self::new()
    }
}

/// One progress line of a running chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Bernoulli log-likelihood over training ones plus sampled zero
    /// probes at the current parameters.
    pub train_ll: f64,
    /// Components with weight above the pruning fraction of the maximum.
    pub active_components: usize,
    /// Online runs: id of the minibatch this iteration processed.
    pub minibatch: Option<usize>,
    /// Online runs: the reweighting factor applied to this minibatch's
    /// statistics.
    pub reweight: Option<f64>,
}

impl ProgressRecord {
    /// The progress-log line for this record.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "iter {} train_ll {:.6} active {}",
            self.iteration, self.train_ll, self.active_components
        );
        if let Some(mb) = self.minibatch {
            line.push_str(&format!(" minibatch {mb}"));
        }
        if let Some(w) = self.reweight {
            line.push_str(&format!(" reweight {w:.6}"));
        }
        line
    }
}

/// Everything a finished chain hands to prediction and reporting.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Tensor shape the chain was fit to.
    pub shape: Vec<usize>,
    /// `(mode, size)` of each attached network, in input order.
    pub network_modes: Vec<(usize, usize)>,
    pub rank: usize,
    pub seed: u64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Post-burn-in snapshots, every `thin`-th iteration.
    pub samples: Vec<ParamsSnapshot>,
    /// Mean of all post-burn-in iterations (not only the thinned ones).
    pub mean: ParamsSnapshot,
    /// Parameters at the final iteration.
    pub final_params: ParamsSnapshot,
    /// Sufficient statistics at the final iteration.
    pub final_suff: SuffStats,
    /// One record per iteration.
    pub progress: Vec<ProgressRecord>,
    /// Count of one-entries whose rate underflowed to zero and was
    /// floored before latent sampling, summed over all iterations.
    pub floored_rate_events: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparams, ModelState};

    #[test]
    fn active_component_counting() {
        assert_eq!(active_components(&[1.0, 0.5, 1e-5], 1e-3), 2);
        assert_eq!(active_components(&[2.0, 0.003, 0.0021], 1e-3), 3);
        assert_eq!(active_components(&[2.0, 0.003, 0.0019], 1e-3), 2);
        assert_eq!(active_components(&[0.0, 0.0], 1e-3), 0);
        assert_eq!(active_components(&[5.0], 1e-3), 1);
    }

    #[test]
    fn running_mean_averages_states() {
        let hyper = Hyperparams::defaults(2, 3);
        let a = ModelState::init(1, &hyper, &[2, 2], &[]).unwrap();
        let b = ModelState::init(2, &hyper, &[2, 2], &[]).unwrap();
        let mut rm = RunningMean::new();
        rm.add(&a);
        rm.add(&b);
        let mean = rm.finish().unwrap();
        for r in 0..3 {
            let expect = (a.weights.lambda[r] + b.weights.lambda[r]) / 2.0;
            assert!((mean.weights.lambda[r] - expect).abs() < 1e-12);
        }
        let expect00 = (a.factors[0].get(0, 0) + b.factors[0].get(0, 0)) / 2.0;
        assert!((mean.factors[0].get(0, 0) - expect00).abs() < 1e-12);
    }

    #[test]
    fn running_mean_requires_at_least_one_state() {
        assert!(RunningMean::new().finish().is_err());
    }

    #[test]
    fn progress_line_formats() {
        let rec = ProgressRecord {
            iteration: 12,
            train_ll: -34.5,
            active_components: 7,
            minibatch: None,
            reweight: None,
        };
        assert_eq!(rec.to_line(), "iter 12 train_ll -34.500000 active 7");
        let online = ProgressRecord {
            minibatch: Some(3),
            reweight: Some(10.0),
            ..rec
        };
        assert_eq!(
            online.to_line(),
            "iter 12 train_ll -34.500000 active 7 minibatch 3 reweight 10.000000"
        );
    }
}
