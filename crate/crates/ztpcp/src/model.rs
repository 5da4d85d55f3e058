//! Model parameters, hyperparameters, sufficient statistics, and the rate
//! computations everything else is built on.
//!
//! The generative story: each tensor cell carries a latent count
//! `y_i ~ Pois(Σ_r λ_r Π_k u^(k)[i_k, r])`, and the observed binary entry
//! is `b_i = 1(y_i >= 1)`, so `P(b_i = 1) = 1 − exp(−rate)`. Factor
//! columns `u_r^(k)` are Dirichlet-distributed points on the simplex,
//! each weight `λ_r` has a gamma prior whose scale is the odds of a
//! beta-distributed `p_r` (which is what lets surplus components shrink),
//! and an attached mode network gets the analogous pair `(β_r, h_r)` with
//! edge rate `Σ_r β_r u[i,r] u[j,r]`.

use crate::error::{Error, Result};
use crate::rng::{streams, RngHandle};
use crate::sampling::{beta_sample, dirichlet_sample, gamma_sample};
use crate::tensor::{ModeNetwork, SparseBinaryTensor};

/// Above this tensor order, per-component factor products are computed in
/// log space: entries are at most 1, so long products underflow.
const LOG_SPACE_ORDER: usize = 4;

/// Prior and model-size constants.
///
/// Defaults: `g_r = f_r = 0.1`, `epsilon = alpha = 1/R`, and `a^(k) = c =
/// d = 1.0` (the latter three are judgment calls exposed as knobs rather
/// than reported values).
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Maximum number of components R; unneeded ones shrink toward zero.
    pub rank: usize,
    /// Per-mode Dirichlet concentration a^(k), length K.
    pub a: Vec<f64>,
    /// Concentration of the Beta prior on each p_r.
    pub c: f64,
    /// Mean of the Beta prior on each p_r; in (0, 1).
    pub epsilon: f64,
    /// Per-component gamma shape g_r for the weights λ_r, length R.
    pub g: Vec<f64>,
    /// Concentration of the Beta prior on each network h_r.
    pub d: f64,
    /// Mean of the Beta prior on each network h_r; in (0, 1).
    pub alpha: f64,
    /// Per-component gamma shape f_r for the network weights β_r, length R.
    pub f: Vec<f64>,
}

impl Hyperparams {
    /// Default hyperparameters for a tensor of the given order and a
    /// maximum rank.
    ///
    /// `epsilon` and `alpha` default to `1/R`; at rank 1 that would hit
    /// the open-interval boundary, so 1/2 is used instead.
    pub fn defaults(order: usize, rank: usize) -> Self {
        let mean = 1.0 / (rank.max(2)) as f64;
        Hyperparams {
            rank,
            a: vec![1.0; order],
            c: 1.0,
            epsilon: mean,
            g: vec![0.1; rank],
            d: 1.0,
            alpha: mean,
            f: vec![0.1; rank],
        }
    }

    /// Check positivity and interval constraints against a tensor order.
    pub fn validate(&self, order: usize) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.a.len() != order {
            return Err(Error::Config(format!(
                "expected {} per-mode Dirichlet concentrations, got {}",
                order,
                self.a.len()
            )));
        }
        if self.g.len() != self.rank || self.f.len() != self.rank {
            return Err(Error::Config(format!(
                "per-component shapes must have length {}, got g: {}, f: {}",
                self.rank,
                self.g.len(),
                self.f.len()
            )));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and positive, got {v}")))
            }
        };
        for &v in &self.a {
            positive("a", v)?;
        }
        for &v in &self.g {
            positive("g", v)?;
        }
        for &v in &self.f {
            positive("f", v)?;
        }
        positive("c", self.c)?;
        positive("d", self.d)?;
        for (name, v) in [("epsilon", self.epsilon), ("alpha", self.alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// One mode's factor matrix: `n_k x R`, every column on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    /// 1-based mode number.
    pub mode: usize,
    rows: usize,
    rank: usize,
    /// Row-major entries, `rows x rank`.
    data: Vec<f64>,
}

impl FactorMatrix {
    /// A zero matrix (columns must be filled before use).
    pub fn zeroed(mode: usize, rows: usize, rank: usize) -> Self {
        FactorMatrix {
            mode,
            rows,
            rank,
            data: vec![0.0; rows * rank],
        }
    }

    /// Wrap existing row-major data, checking only the dimensions.
    pub fn from_data(mode: usize, rows: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * rank {
            return Err(Error::Config(format!(
                "factor matrix for mode {mode} needs {} entries, got {}",
                rows * rank,
                data.len()
            )));
        }
        Ok(FactorMatrix { mode, rows, rank, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row `j` as a slice of length R.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.rank..(j + 1) * self.rank]
    }

    pub fn get(&self, j: usize, r: usize) -> f64 {
        self.data[j * self.rank + r]
    }

    /// Copy column `r` out (length `rows`).
    pub fn column(&self, r: usize) -> Vec<f64> {
        (0..self.rows).map(|j| self.get(j, r)).collect()
    }

    /// Overwrite a single entry.
    pub fn set_entry(&mut self, j: usize, r: usize, value: f64) {
        self.data[j * self.rank + r] = value;
    }

    /// Multiply every entry by `factor` (used when finishing averages).
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Overwrite column `r`.
    pub fn set_column(&mut self, r: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows, "column length must equal row count");
        for (j, &v) in values.iter().enumerate() {
            self.data[j * self.rank + r] = v;
        }
    }

    /// Raw row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Verify nonnegativity and unit column sums (tolerance 1e-9).
    pub fn check_simplex_columns(&self) -> Result<()> {
        if self.data.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::Config(format!(
                "factor matrix for mode {} has a negative or NaN entry",
                self.mode
            )));
        }
        for r in 0..self.rank {
            let sum: f64 = (0..self.rows).map(|j| self.get(j, r)).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "factor matrix for mode {} column {} sums to {sum}, expected 1",
                    self.mode, r
                )));
            }
        }
        Ok(())
    }
}

/// Component weights for the tensor: `λ_r > 0` and `p_r ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalWeights {
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
}

/// Component weights for one attached network: `β_r > 0`, `h_r ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub beta: Vec<f64>,
    pub h: Vec<f64>,
}

/// Aggregated latent counts driving every conjugate update.
///
/// `s_mode[k][j * R + r]` is the total allocation to component `r` by
/// one-entries whose mode-`k` coordinate is `j`; `s_total[r]` is the
/// grand total. `v_node` and `v_total` are the analogues for each
/// attached network's edges. Entries are reals, not integers, because
/// online runs fold in decayed and reweighted increments.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub s_mode: Vec<Vec<f64>>,
    pub s_total: Vec<f64>,
    pub v_node: Vec<Vec<f64>>,
    pub v_total: Vec<Vec<f64>>,
}

impl SuffStats {
    /// All-zero statistics shaped for a tensor and its networks.
    pub fn zeroed(shape: &[usize], rank: usize, networks: &[ModeNetwork]) -> Self {
        let sizes: Vec<usize> = networks.iter().map(|n| n.size).collect();
        Self::zeroed_dims(shape, rank, &sizes)
    }

    /// All-zero statistics from raw dimensions (one size per network).
    pub fn zeroed_dims(shape: &[usize], rank: usize, network_sizes: &[usize]) -> Self {
        SuffStats {
            s_mode: shape.iter().map(|&n| vec![0.0; n * rank]).collect(),
            s_total: vec![0.0; rank],
            v_node: network_sizes.iter().map(|&n| vec![0.0; n * rank]).collect(),
            v_total: network_sizes.iter().map(|_| vec![0.0; rank]).collect(),
        }
    }
}

/// Latent counts at the stored one-entries (`y`, one per tensor one) and
/// at each network's stored edges (`x`, one vector per network).
///
/// Allocation vectors and their probabilities are transient inside the
/// latent-update operations and never persisted. Every stored count is
/// at least 1: zeros force their latent count to zero and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub y: Vec<u64>,
    pub x: Vec<Vec<u64>>,
}

impl LatentState {
    /// Counts of 1 everywhere, sized for the training data.
    pub fn ones_for(tensor: &SparseBinaryTensor, networks: &[ModeNetwork]) -> Self {
        LatentState {
            y: vec![1; tensor.nnz()],
            x: networks.iter().map(|n| vec![1; n.edge_count()]).collect(),
        }
    }
}

/// Training inputs: the tensor plus zero or more mode networks.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub tensor: SparseBinaryTensor,
    pub networks: Vec<ModeNetwork>,
}

impl TrainData {
    /// Validate that each network matches its mode's size and that no two
    /// networks attach to the same mode.
    pub fn new(tensor: SparseBinaryTensor, networks: Vec<ModeNetwork>) -> Result<Self> {
        let mut seen = vec![false; tensor.order()];
        for net in &networks {
            if net.mode == 0 || net.mode > tensor.order() {
                return Err(Error::Config(format!(
                    "network mode {} out of range for a tensor of order {}",
                    net.mode,
                    tensor.order()
                )));
            }
            let expect = tensor.shape()[net.mode - 1];
            if net.size != expect {
                return Err(Error::Config(format!(
                    "network on mode {} has {} entities, tensor mode size is {expect}",
                    net.mode, net.size
                )));
            }
            if seen[net.mode - 1] {
                return Err(Error::Config(format!(
                    "more than one network attached to mode {}",
                    net.mode
                )));
            }
            seen[net.mode - 1] = true;
        }
        Ok(TrainData { tensor, networks })
    }
}

/// Full parameter state of one chain.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub hyper: Hyperparams,
    pub factors: Vec<FactorMatrix>,
    pub weights: GlobalWeights,
    /// One entry per attached network, in `TrainData::networks` order.
    pub net_weights: Vec<NetworkWeights>,
    pub suff: SuffStats,
}

impl ModelState {
    /// Draw an initial state from the prior, with zeroed statistics.
    ///
    /// Deterministic given `(seed, hyper, shape, networks)`: all draws
    /// come from the initialization stream of the master seed.
    pub fn init(
        seed: u64,
        hyper: &Hyperparams,
        shape: &[usize],
        networks: &[ModeNetwork],
    ) -> Result<Self> {
        hyper.validate(shape.len())?;
        let mut rng = RngHandle::new(seed, streams::INIT);
        let rank = hyper.rank;

        let mut factors = Vec::with_capacity(shape.len());
        for (k, &n) in shape.iter().enumerate() {
            let mut fm = FactorMatrix::zeroed(k + 1, n, rank);
            let alphas = vec![hyper.a[k]; n];
            for r in 0..rank {
                fm.set_column(r, &dirichlet_sample(&mut rng, &alphas));
            }
            factors.push(fm);
        }

        let mut p = Vec::with_capacity(rank);
        let mut lambda = Vec::with_capacity(rank);
        for r in 0..rank {
            let pr = beta_sample(&mut rng, hyper.c * hyper.epsilon, hyper.c * (1.0 - hyper.epsilon));
            p.push(pr);
            lambda.push(gamma_sample(&mut rng, hyper.g[r], pr / (1.0 - pr)));
        }

        let mut net_weights = Vec::with_capacity(networks.len());
        for _ in networks {
            let mut h = Vec::with_capacity(rank);
            let mut beta = Vec::with_capacity(rank);
            for r in 0..rank {
                let hr = beta_sample(&mut rng, hyper.d * hyper.alpha, hyper.d * (1.0 - hyper.alpha));
                h.push(hr);
                beta.push(gamma_sample(&mut rng, hyper.f[r], hr / (1.0 - hr)));
            }
            net_weights.push(NetworkWeights { beta, h });
        }

        Ok(ModelState {
            hyper: hyper.clone(),
            factors,
            weights: GlobalWeights { lambda, p },
            net_weights,
            suff: SuffStats::zeroed(shape, rank, networks),
        })
    }
}

/// Per-component rate terms `λ_r Π_k u^(k)[i_k, r]`, written into `out`.
///
/// The latent-count allocation probabilities are these terms normalized,
/// and their sum is the cell's Poisson rate, so both consumers share this
/// one computation. Products run in log space above order 4.
pub fn rate_terms(index: &[usize], factors: &[FactorMatrix], weights: &GlobalWeights, out: &mut [f64]) {
    let rank = weights.lambda.len();
    debug_assert_eq!(index.len(), factors.len(), "index order must match factor count");
    debug_assert_eq!(out.len(), rank);
    if factors.len() <= LOG_SPACE_ORDER {
        for (r, slot) in out.iter_mut().enumerate() {
            let mut prod = weights.lambda[r];
            for (fm, &coord) in factors.iter().zip(index) {
                prod *= fm.get(coord, r);
            }
            *slot = prod;
        }
    } else {
        for (r, slot) in out.iter_mut().enumerate() {
            let mut log_prod = 0.0f64;
            for (fm, &coord) in factors.iter().zip(index) {
                // ln(0) = -inf exponentiates back to an exact 0 product.
                log_prod += fm.get(coord, r).ln();
            }
            *slot = weights.lambda[r] * log_prod.exp();
        }
    }
}

/// The cell's Poisson rate `Σ_r λ_r Π_k u^(k)[i_k, r]`. Cost O(RK).
pub fn cp_rate(index: &[usize], factors: &[FactorMatrix], weights: &GlobalWeights) -> f64 {
    let mut terms = vec![0.0; weights.lambda.len()];
    rate_terms(index, factors, weights, &mut terms);
    terms.iter().sum()
}

/// Marginal probability that a cell with this rate is a one:
/// `1 − exp(−rate)`.
///
/// Computed as `−expm1(−rate)` so small rates keep full precision.
///
/// # Panics
///
/// Panics if `rate` is negative or NaN.
pub fn bernoulli_prob(rate: f64) -> f64 {
    assert!(rate >= 0.0, "bernoulli_prob requires a nonnegative rate, got {rate}");
    -(-rate).exp_m1()
}

/// Poisson rate of a network edge: `Σ_r β_r u[i, r] u[j, r]`.
pub fn network_rate(i: usize, j: usize, factor: &FactorMatrix, nw: &NetworkWeights) -> f64 {
    let (ui, uj) = (factor.row(i), factor.row(j));
    nw.beta
        .iter()
        .zip(ui.iter().zip(uj))
        .map(|(&b, (&a, &c))| b * a * c)
        .sum()
}

/// Per-component edge rate terms `β_r u[i, r] u[j, r]`, for allocation.
pub fn network_rate_terms(i: usize, j: usize, factor: &FactorMatrix, nw: &NetworkWeights, out: &mut [f64]) {
    let (ui, uj) = (factor.row(i), factor.row(j));
    for (slot, (&b, (&a, &c))) in out.iter_mut().zip(nw.beta.iter().zip(ui.iter().zip(uj))) {
        *slot = b * a * c;
    }
}
