//! Cold-start completion: a mode network rescues unseen entities.
//!
//! The planted truth is a grid of twelve equally weighted communities:
//! mode-2 entities fall into 4 blocks, mode-3 entities into 3, and each
//! (block, block) pair is one community owned by five mode-1 entities.
//! The pairs tile the whole mode-2 x mode-3 grid with equal weight, so
//! once a mode-1 entity's community is unknown, every cell of its slice
//! looks alike. A block of mode-1 entities is then held out entirely:
//! without the mode-1 network the fit scores their slices near chance,
//! and with it their community membership flows through the shared
//! factor matrix.
//!
//! Run with: `cargo run --release --example cold_start`

use ztpcp::gibbs::run_chain;
use ztpcp::metrics::{auc_roc, predict_set, PredictionMode};
use ztpcp::model::{FactorMatrix, TrainData};
use ztpcp::synth::{generate, SynthSpec};
use ztpcp::tensor::{split_holdout, SplitSpec};
use ztpcp::Hyperparams;

const N1: usize = 60;
const N2: usize = 40;
const N3: usize = 18;
const JBLOCKS: usize = 4;
const KBLOCKS: usize = 3;
const R_TRUE: usize = JBLOCKS * KBLOCKS;
const HOLD_FROM: usize = 42;

/// Community r owns mode-1 entities {i : i % R_TRUE == r}, uniformly.
fn entity_partition() -> FactorMatrix {
    let mut data = vec![0.0; N1 * R_TRUE];
    for r in 0..R_TRUE {
        let members: Vec<usize> = (0..N1).filter(|i| i % R_TRUE == r).collect();
        for &i in &members {
            data[i * R_TRUE + r] = 1.0 / members.len() as f64;
        }
    }
    FactorMatrix::from_data(1, N1, R_TRUE, data).unwrap()
}

/// Community r is the block pair (r % JBLOCKS, r / JBLOCKS); the column
/// for mode 2 or 3 is uniform over the block `pick(r)` of `rows/blocks`
/// entities. Columns repeat across communities sharing a block, so the
/// block pairs tile the whole (mode-2, mode-3) grid.
fn block_factor(mode: usize, rows: usize, blocks: usize, pick: fn(usize) -> usize) -> FactorMatrix {
    let per = rows / blocks;
    let mut data = vec![0.0; rows * R_TRUE];
    for r in 0..R_TRUE {
        let b = pick(r);
        for j in (b * per)..((b + 1) * per) {
            data[j * R_TRUE + r] = 1.0 / per as f64;
        }
    }
    FactorMatrix::from_data(mode, rows, R_TRUE, data).unwrap()
}

fn main() -> ztpcp::Result<()> {
    let mut spec = SynthSpec::new(vec![N1, N2, N3], R_TRUE, 42);
    spec.factors = Some(vec![
        entity_partition(),
        block_factor(2, N2, JBLOCKS, |r| r % JBLOCKS),
        block_factor(3, N3, KBLOCKS, |r| r / JBLOCKS),
    ]);
    spec.lambda = Some(vec![210.0; R_TRUE]);
    spec.networks = vec![1];
    spec.beta = Some(vec![75.0; R_TRUE]);
    let synth = generate(&spec)?;
    println!(
        "tensor: {} ones, network: {} edges on mode 1",
        synth.tensor.nnz(),
        synth.networks[0].edge_count(),
    );

    // Hide the last 30% of mode-1 entities: slices 42..60.
    let split = SplitSpec::ColdStartSlice { mode: 1, range: (HOLD_FROM, N1), seed: 42 };
    let (train, test) = split_holdout(&synth.tensor, &split, 1.0)?;
    println!("held-out block: {} cells", test.len());

    // Prior strengths chosen for mixing at this small scale: every
    // component stays live at initialization, so the twelve communities
    // and the network can claim columns instead of collapsing onto the
    // few that drew large initial weights.
    let fit_rank = 15;
    let mut hyper = Hyperparams::defaults(3, fit_rank);
    hyper.c = 20.0;
    hyper.g = vec![2.0; fit_rank];
    hyper.f = vec![1.0; fit_rank];
    hyper.d = 10.0;
    hyper.alpha = 0.5;

    for use_network in [false, true] {
        let networks = if use_network { vec![synth.networks[0].clone()] } else { vec![] };
        let data = TrainData::new(train.clone(), networks)?;
        let chain = run_chain(11, &data, &hyper, 1000, 500, 1, |_| {})?;
        let predictions = predict_set(&chain, &test, PredictionMode::Averaged)?;
        let label = if use_network { "with network   " } else { "without network" };
        println!("{label} AUC-ROC: {:.4}", auc_roc(&predictions)?);
    }
    Ok(())
}
