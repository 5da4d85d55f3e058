//! Fit with the online sampler: minibatches plus streaming statistics.
//!
//! Each iteration sweeps a tenth of the one-entries, reweights their
//! latent counts to full-data scale, and refreshes the parameters from
//! closed-form conditionals. Progress lines show the minibatch ordinal
//! and the reweight factor.
//!
//! Run with: `cargo run --release --example fit_online`

use ztpcp::model::TrainData;
use ztpcp::online::{run_online_chain, MinibatchSpec};
use ztpcp::synth::{generate, SynthSpec};
use ztpcp::Hyperparams;

fn main() -> ztpcp::Result<()> {
    let mut spec = SynthSpec::new(vec![40, 40, 15], 3, 7);
    spec.lambda = Some(vec![700.0, 500.0, 350.0]);
    spec.hyper.a = vec![0.2; 3];
    let synth = generate(&spec)?;
    let data = TrainData::new(synth.tensor, vec![])?;
    println!("data: {} ones", data.tensor.nnz());

    let schedule = MinibatchSpec::tenth(&data);
    println!(
        "minibatch: {} of {} ones per iteration, reweight {}",
        schedule.batch,
        data.tensor.nnz(),
        schedule.reweight,
    );

    let hyper = Hyperparams::defaults(3, 8);
    let chain = run_online_chain(11, &data, &hyper, &schedule, 300, 150, 1, |record| {
        if record.iteration % 50 == 0 {
            println!("{}", record.to_line());
        }
    })?;

    let mut weights = chain.mean.weights.lambda.clone();
    weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
    println!("\nposterior-mean weights, largest first: {weights:.1?}");
    Ok(())
}
