//! Fit a batch Gibbs chain and watch the rank shrink.
//!
//! Generates rank-3 data, fits with rank 8, and prints progress lines
//! plus the final component rank report: the surplus components' weights
//! collapse toward zero on their own.
//!
//! Run with: `cargo run --release --example fit_batch`

use ztpcp::gibbs::run_chain;
use ztpcp::metrics::{format_rank_report, rank_report};
use ztpcp::model::TrainData;
use ztpcp::synth::{generate, SynthSpec};
use ztpcp::Hyperparams;

fn main() -> ztpcp::Result<()> {
    let mut spec = SynthSpec::new(vec![40, 40, 15], 3, 7);
    spec.lambda = Some(vec![700.0, 500.0, 350.0]);
    spec.hyper.a = vec![0.2; 3];
    let synth = generate(&spec)?;
    println!("data: {} ones, true rank 3", synth.tensor.nnz());

    let data = TrainData::new(synth.tensor, vec![])?;
    let hyper = Hyperparams::defaults(3, 8);
    let chain = run_chain(11, &data, &hyper, 300, 150, 1, |record| {
        if record.iteration % 50 == 0 {
            println!("{}", record.to_line());
        }
    })?;

    println!("\nposterior-mean component weights, largest first:");
    print!("{}", format_rank_report(&rank_report(&chain, 1e-3)));
    Ok(())
}
