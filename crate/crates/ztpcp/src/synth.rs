//! Synthetic data: draw ground-truth parameters, then realize a binary
//! tensor (and optional mode networks) from the model's own generative
//! process by full cell enumeration.

use crate::chain::ParamsSnapshot;
use crate::checkpoint::{write_checkpoint, Checkpoint, CheckpointKind};
use crate::error::{Error, Result};
use crate::model::{
    bernoulli_prob, cp_rate, network_rate, FactorMatrix, GlobalWeights, Hyperparams,
    NetworkWeights, SuffStats,
};
use crate::rng::{streams, RngHandle};
use crate::sampling::{beta_sample, dirichlet_sample, gamma_sample};
use crate::tensor::{write_network, write_tensor, ModeNetwork, SparseBinaryTensor, TensorIndex};
use rand::Rng as _;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Default ceiling on the number of cells the generator will enumerate.
pub const DEFAULT_MAX_CELLS: u64 = 10_000_000;

/// Default ceiling on the expected number of ones.
pub const DEFAULT_MAX_EXPECTED_ONES: f64 = 5_000_000.0;

/// Cells per parallel work unit during enumeration.
const ENUM_CHUNK: u64 = 4096;

/// What to generate and from which distributions.
///
/// Factor matrices are drawn from their Dirichlet priors unless given
/// explicitly via `factors`. The component weights come from their
/// priors too unless given explicitly via `lambda` (and `beta` for
/// networks).
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub shape: Vec<usize>,
    /// True component count.
    pub rank: usize,
    /// Prior parameters for everything not fixed explicitly.
    pub hyper: Hyperparams,
    /// Explicit ground-truth factor matrices, one per mode, each with
    /// simplex columns. Lets simulation studies plant structured truths
    /// (for example disjoint entity blocks) that Dirichlet draws would
    /// almost never produce.
    pub factors: Option<Vec<FactorMatrix>>,
    /// Explicit component weights, one per component.
    pub lambda: Option<Vec<f64>>,
    /// Explicit network weights, one per component, shared by all
    /// generated networks.
    pub beta: Option<Vec<f64>>,
    /// 1-based modes that get a similarity network.
    pub networks: Vec<usize>,
    pub seed: u64,
    /// Refuse to enumerate more cells than this.
    pub max_cells: u64,
    /// Refuse when the expected number of ones exceeds this.
    pub max_expected_ones: f64,
}

impl SynthSpec {
    /// A spec with prior-drawn parameters, no networks, and default
    /// budgets.
    pub fn new(shape: Vec<usize>, rank: usize, seed: u64) -> Self {
        let hyper = Hyperparams::defaults(shape.len(), rank);
        SynthSpec {
            shape,
            rank,
            hyper,
            factors: None,
            lambda: None,
            beta: None,
            networks: Vec::new(),
            seed,
            max_cells: DEFAULT_MAX_CELLS,
            max_expected_ones: DEFAULT_MAX_EXPECTED_ONES,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shape.len() < 2 {
            return Err(Error::Config(format!(
                "tensor must have at least 2 modes, got {}",
                self.shape.len()
            )));
        }
        if self.shape.contains(&0) {
            return Err(Error::Config("every mode size must be positive".into()));
        }
        if self.rank == 0 {
            return Err(Error::Config("true rank must be at least 1".into()));
        }
        if self.hyper.rank != self.rank {
            return Err(Error::Config(format!(
                "hyperparameters are for rank {}, spec rank is {}",
                self.hyper.rank, self.rank
            )));
        }
        self.hyper.validate(self.shape.len())?;
        for (name, values) in [("lambda", &self.lambda), ("beta", &self.beta)] {
            if let Some(v) = values {
                if v.len() != self.rank {
                    return Err(Error::Config(format!(
                        "explicit {name} needs {} entries, got {}",
                        self.rank,
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Config(format!(
                        "explicit {name} entries must be finite and nonnegative"
                    )));
                }
            }
        }
        if let Some(factors) = &self.factors {
            if factors.len() != self.shape.len() {
                return Err(Error::Config(format!(
                    "explicit factors need {} matrices, got {}",
                    self.shape.len(),
                    factors.len()
                )));
            }
            for (k, fm) in factors.iter().enumerate() {
                if fm.mode != k + 1 || fm.rows() != self.shape[k] || fm.rank() != self.rank {
                    return Err(Error::Config(format!(
                        "explicit factor matrix at position {} must be tagged mode {} \
                         and sized {}x{}, got mode {} sized {}x{}",
                        k,
                        k + 1,
                        self.shape[k],
                        self.rank,
                        fm.mode,
                        fm.rows(),
                        fm.rank()
                    )));
                }
                fm.check_simplex_columns()?;
            }
        }
        let mut seen = vec![false; self.shape.len()];
        for &mode in &self.networks {
            if mode == 0 || mode > self.shape.len() {
                return Err(Error::Config(format!(
                    "network mode {mode} out of range for a tensor of order {}",
                    self.shape.len()
                )));
            }
            if seen[mode - 1] {
                return Err(Error::Config(format!("network mode {mode} listed twice")));
            }
            seen[mode - 1] = true;
        }
        Ok(())
    }
}

/// Everything the generator produced.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub tensor: SparseBinaryTensor,
    /// One network per requested mode, in request order.
    pub networks: Vec<ModeNetwork>,
    /// Ground-truth parameters as a loadable checkpoint.
    pub truth: Checkpoint,
    /// Exact expected number of ones under the truth, `sum of
    /// 1 - exp(-rate)` over all cells.
    pub expected_ones: f64,
}

fn cell_count(shape: &[usize]) -> u128 {
    shape.iter().map(|&n| n as u128).product()
}

/// Draw the ground-truth parameters on the generator's own stream.
fn draw_truth(spec: &SynthSpec) -> ParamsSnapshot {
    let mut rng = RngHandle::substream(spec.seed, streams::SYNTH, 0, 0);
    let rank = spec.rank;
    let hyper = &spec.hyper;

    let factors = match &spec.factors {
        Some(given) => given.clone(),
        None => {
            let mut drawn = Vec::with_capacity(spec.shape.len());
            for (k, &n) in spec.shape.iter().enumerate() {
                let mut fm = FactorMatrix::zeroed(k + 1, n, rank);
                let alphas = vec![hyper.a[k]; n];
                for r in 0..rank {
                    fm.set_column(r, &dirichlet_sample(&mut rng, &alphas));
                }
                drawn.push(fm);
            }
            drawn
        }
    };

    let mut p = Vec::with_capacity(rank);
    let mut lambda = Vec::with_capacity(rank);
    for r in 0..rank {
        let pr = beta_sample(&mut rng, hyper.c * hyper.epsilon, hyper.c * (1.0 - hyper.epsilon));
        p.push(pr);
        lambda.push(match &spec.lambda {
            Some(l) => l[r],
            None => gamma_sample(&mut rng, hyper.g[r], pr / (1.0 - pr)),
        });
    }

    let mut net_weights = Vec::with_capacity(spec.networks.len());
    for _ in &spec.networks {
        let mut h = Vec::with_capacity(rank);
        let mut beta = Vec::with_capacity(rank);
        for r in 0..rank {
            let hr = beta_sample(&mut rng, hyper.d * hyper.alpha, hyper.d * (1.0 - hyper.alpha));
            h.push(hr);
            beta.push(match &spec.beta {
                Some(b) => b[r],
                None => gamma_sample(&mut rng, hyper.f[r], hr / (1.0 - hr)),
            });
        }
        net_weights.push(NetworkWeights { beta, h });
    }

    ParamsSnapshot {
        factors,
        weights: GlobalWeights { lambda, p },
        net_weights,
    }
}

/// Generate a data set.
///
/// A pure function of the spec: the same spec (including seed) yields
/// the identical tensor, networks, and ground truth, for any thread
/// count. Every cell is enumerated, so generation refuses shapes beyond
/// `max_cells` and parameter draws whose expected one count exceeds
/// `max_expected_ones`, with an estimate in the error.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let cells = cell_count(&spec.shape);
    if cells > spec.max_cells as u128 {
        return Err(Error::Budget(format!(
            "shape {:?} has {cells} cells; the enumeration budget is {} \
             (raise max_cells to override)",
            spec.shape, spec.max_cells
        )));
    }
    let truth = draw_truth(spec);

    // Unit factor columns make the total rate mass exactly the weight
    // total, which bounds the expected one count from above.
    let weight_total: f64 = truth.weights.lambda.iter().sum();
    let bound = weight_total.min(cells as f64);
    if bound > spec.max_expected_ones {
        return Err(Error::Budget(format!(
            "expected about {bound:.0} ones (weight total {weight_total:.0} over {cells} cells); \
             the budget is {:.0} (raise max_expected_ones to override)",
            spec.max_expected_ones
        )));
    }

    // Dummy tensor used only for index arithmetic during enumeration.
    let empty = SparseBinaryTensor::new(spec.shape.clone(), Vec::new())?;
    let cells = cells as u64;
    let n_chunks = cells.div_ceil(ENUM_CHUNK);
    let per_chunk: Vec<(Vec<TensorIndex>, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * ENUM_CHUNK;
            let end = (start + ENUM_CHUNK).min(cells);
            let mut ones = Vec::new();
            let mut expected = 0.0;
            for linear in start..end {
                let index = empty.unlinear(linear);
                let rate = cp_rate(&index, &truth.factors, &truth.weights);
                let prob = bernoulli_prob(rate);
                expected += prob;
                let mut rng = RngHandle::substream(spec.seed, streams::SYNTH, 1, linear);
                if rng.gen_range(0.0..1.0) < prob {
                    ones.push(index);
                }
            }
            (ones, expected)
        })
        .collect();
    let mut ones = Vec::new();
    let mut expected_ones = 0.0;
    for (chunk_ones, chunk_expected) in per_chunk {
        ones.extend(chunk_ones);
        expected_ones += chunk_expected;
    }
    let tensor = SparseBinaryTensor::new(spec.shape.clone(), ones)?;

    let mut networks = Vec::with_capacity(spec.networks.len());
    for (ni, &mode) in spec.networks.iter().enumerate() {
        let size = spec.shape[mode - 1];
        let factor = &truth.factors[mode - 1];
        let nw = &truth.net_weights[ni];
        let mut edges = Vec::new();
        for i in 0..size {
            for j in (i + 1)..size {
                let rate = network_rate(i, j, factor, nw);
                let mut rng = RngHandle::substream(
                    spec.seed,
                    streams::SYNTH,
                    2 + ni as u64,
                    (i * size + j) as u64,
                );
                if rng.gen_range(0.0..1.0) < bernoulli_prob(rate) {
                    edges.push((i, j));
                }
            }
        }
        networks.push(ModeNetwork::new(mode, size, edges)?);
    }

    let truth = Checkpoint {
        kind: CheckpointKind::Truth,
        shape: spec.shape.clone(),
        rank: spec.rank,
        iteration: 0,
        seed: spec.seed,
        networks: networks.iter().map(|n| (n.mode, n.size)).collect(),
        params: truth,
        suff: SuffStats::zeroed_dims(
            &spec.shape,
            spec.rank,
            &networks.iter().map(|n| n.size).collect::<Vec<_>>(),
        ),
    };

    Ok(SynthOutput {
        tensor,
        networks,
        truth,
        expected_ones,
    })
}

/// Write a generated data set into `dir`: `tensor.txt`, one
/// `network_mode<k>.txt` per network, and `truth_checkpoint.txt`.
/// Returns the paths written.
pub fn write_synth_files(out: &SynthOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let tensor_path = dir.join("tensor.txt");
    write_tensor(&tensor_path, &out.tensor)?;
    written.push(tensor_path);
    for net in &out.networks {
        let path = dir.join(format!("network_mode{}.txt", net.mode));
        write_network(&path, net)?;
        written.push(path);
    }
    let truth_path = dir.join("truth_checkpoint.txt");
    write_checkpoint(&truth_path, &out.truth)?;
    written.push(truth_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::read_checkpoint;
    use crate::tensor::{load_network, load_tensor};

    #[test]
    fn generation_is_a_pure_function_of_the_spec() {
        let mut spec = SynthSpec::new(vec![12, 9, 5], 3, 77);
        spec.lambda = Some(vec![40.0, 25.0, 10.0]);
        spec.networks = vec![1];
        spec.beta = Some(vec![30.0, 20.0, 10.0]);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.tensor.ones().collect::<Vec<_>>(), b.tensor.ones().collect::<Vec<_>>());
        assert_eq!(
            a.networks[0].edges().collect::<Vec<_>>(),
            b.networks[0].edges().collect::<Vec<_>>()
        );
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.expected_ones.to_bits(), b.expected_ones.to_bits());

        let mut other = spec.clone();
        other.seed = 78;
        let c = generate(&other).unwrap();
        assert_ne!(
            a.tensor.ones().collect::<Vec<_>>(),
            c.tensor.ones().collect::<Vec<_>>(),
            "a different seed should give different data"
        );
    }

    #[test]
    fn unit_cell_fires_at_the_bernoulli_rate() {
        // A 1x1 tensor with weight ln 2 has rate ln 2 (factor entries are
        // exactly 1), so the single cell is a one with probability 1/2.
        // 10^4 seeds: 3 standard deviations is 0.015.
        let mut hits = 0;
        for seed in 0..10_000 {
            let mut spec = SynthSpec::new(vec![1, 1], 1, seed);
            spec.lambda = Some(vec![2.0f64.ln()]);
            let out = generate(&spec).unwrap();
            assert!((out.expected_ones - 0.5).abs() < 1e-12);
            hits += out.tensor.nnz();
        }
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.015, "frequency {freq}");
    }

    #[test]
    fn zero_weights_give_an_empty_tensor() {
        let mut spec = SynthSpec::new(vec![6, 5, 4], 2, 3);
        spec.lambda = Some(vec![0.0, 0.0]);
        let out = generate(&spec).unwrap();
        assert_eq!(out.tensor.nnz(), 0);
        assert_eq!(out.expected_ones, 0.0);
    }

    #[test]
    fn realized_count_tracks_the_expected_count() {
        let mut spec = SynthSpec::new(vec![30, 20, 10], 2, 11);
        spec.lambda = Some(vec![300.0, 200.0]);
        let out = generate(&spec).unwrap();
        let expected = out.expected_ones;
        assert!(expected > 50.0, "expected count {expected} suspiciously small");
        // Bernoulli sum: variance is at most the expectation.
        let slack = 4.0 * expected.sqrt() + 1.0;
        let nnz = out.tensor.nnz() as f64;
        assert!(
            (nnz - expected).abs() < slack,
            "{nnz} ones vs {expected} expected"
        );
    }

    #[test]
    fn budgets_refuse_oversized_requests() {
        let spec = SynthSpec::new(vec![1000, 1000, 100], 2, 1);
        let err = generate(&spec).unwrap_err();
        assert!(matches!(err, Error::Budget(_)), "got {err}");
        assert!(err.to_string().contains("cells"), "got {err}");

        let mut spec = SynthSpec::new(vec![30, 20, 10], 2, 1);
        spec.lambda = Some(vec![400.0, 100.0]);
        spec.max_expected_ones = 10.0;
        let err = generate(&spec).unwrap_err();
        assert!(matches!(err, Error::Budget(_)), "got {err}");
        assert!(err.to_string().contains("500"), "estimate missing: {err}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&SynthSpec::new(vec![5], 2, 1)).is_err());
        assert!(generate(&SynthSpec::new(vec![5, 4], 0, 1)).is_err());
        let mut spec = SynthSpec::new(vec![5, 4], 2, 1);
        spec.lambda = Some(vec![1.0]);
        assert!(generate(&spec).is_err());
        let mut spec = SynthSpec::new(vec![5, 4], 2, 1);
        spec.networks = vec![3];
        assert!(generate(&spec).is_err());
        let mut spec = SynthSpec::new(vec![5, 4], 2, 1);
        spec.networks = vec![1, 1];
        assert!(generate(&spec).is_err());
        let mut spec = SynthSpec::new(vec![5, 4], 2, 1);
        spec.lambda = Some(vec![1.0, f64::NAN]);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn explicit_factors_are_used_verbatim_and_validated() {
        // 4 entities, 2 components: entities 0-1 belong to component 0,
        // entities 2-3 to component 1. A weight of -ln(1-p) per component
        // makes every in-block cell a one with probability p; here the
        // rate is w * (1/2) * (1/2) per cell, so pick w = 4 ln 2 for
        // p = 1/2, and check out-of-block cells are never ones.
        let block = FactorMatrix::from_data(
            1,
            4,
            2,
            vec![0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5],
        )
        .unwrap();
        let mut spec = SynthSpec::new(vec![4, 4], 2, 5);
        spec.factors = Some(vec![block.clone(), {
            let mut m = block.clone();
            m.mode = 2;
            m
        }]);
        spec.lambda = Some(vec![4.0 * 2.0f64.ln(), 4.0 * 2.0f64.ln()]);
        let out = generate(&spec).unwrap();
        assert_eq!(out.truth.params.factors[0].column(0), vec![0.5, 0.5, 0.0, 0.0]);
        for index in out.tensor.ones() {
            let same_block = (index[0] < 2) == (index[1] < 2);
            assert!(same_block, "out-of-block one at {index:?}");
        }
        assert!((out.expected_ones - 8.0 * 0.5).abs() < 1e-9);

        // Wrong shape, wrong mode tag, and non-simplex columns all fail.
        let mut bad = spec.clone();
        bad.factors = Some(vec![block.clone()]);
        assert!(generate(&bad).is_err());
        let mut bad = spec.clone();
        bad.factors = Some(vec![block.clone(), block.clone()]);
        assert!(generate(&bad).is_err());
        let mut bad = spec.clone();
        bad.factors = Some(vec![
            FactorMatrix::from_data(1, 4, 2, vec![0.9, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5])
                .unwrap(),
            {
                let mut m = block.clone();
                m.mode = 2;
                m
            },
        ]);
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn networks_respect_explicit_weights() {
        let mut spec = SynthSpec::new(vec![15, 6], 2, 9);
        spec.lambda = Some(vec![5.0, 5.0]);
        spec.networks = vec![1];
        spec.beta = Some(vec![0.0, 0.0]);
        let out = generate(&spec).unwrap();
        assert_eq!(out.networks[0].edge_count(), 0);

        spec.beta = Some(vec![500.0, 500.0]);
        let out = generate(&spec).unwrap();
        assert!(out.networks[0].edge_count() > 0);
        for (i, j) in out.networks[0].edges() {
            assert!(i < j, "generated networks contain no self-relations");
        }
        assert_eq!(out.truth.networks, vec![(1, 15)]);
    }

    #[test]
    fn written_files_load_back_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = SynthSpec::new(vec![10, 8, 4], 2, 21);
        spec.lambda = Some(vec![30.0, 15.0]);
        spec.networks = vec![2];
        let out = generate(&spec).unwrap();
        assert!(out.tensor.nnz() > 0, "want a nonempty example");
        let written = write_synth_files(&out, dir.path()).unwrap();
        assert_eq!(written.len(), 3);

        let tensor = load_tensor(dir.path().join("tensor.txt"), vec![10, 8, 4]).unwrap();
        assert_eq!(
            tensor.ones().collect::<Vec<_>>(),
            out.tensor.ones().collect::<Vec<_>>()
        );
        let net = load_network(dir.path().join("network_mode2.txt"), 2, 8).unwrap();
        assert_eq!(
            net.edges().collect::<Vec<_>>(),
            out.networks[0].edges().collect::<Vec<_>>()
        );
        let truth = read_checkpoint(dir.path().join("truth_checkpoint.txt")).unwrap();
        assert_eq!(truth.kind, CheckpointKind::Truth);
        assert_eq!(truth.shape, out.truth.shape);
        for (a, b) in truth
            .params
            .weights
            .lambda
            .iter()
            .zip(&out.truth.params.weights.lambda)
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
