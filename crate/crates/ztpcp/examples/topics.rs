//! Inspect fitted components: rank report and top entities per mode.
//!
//! After fitting, the weight report shows which components survived the
//! shrinkage prior; for each active component the highest-probability
//! entities of every mode summarize what the component couples together.
//!
//! Run with: `cargo run --release --example topics`

use ztpcp::gibbs::run_chain;
use ztpcp::metrics::{format_rank_report, rank_report, top_entities};
use ztpcp::model::TrainData;
use ztpcp::synth::{generate, SynthSpec};
use ztpcp::Hyperparams;

fn main() -> ztpcp::Result<()> {
    let mut spec = SynthSpec::new(vec![40, 40, 15], 3, 7);
    spec.lambda = Some(vec![700.0, 500.0, 350.0]);
    spec.hyper.a = vec![0.2; 3];
    let synth = generate(&spec)?;
    let data = TrainData::new(synth.tensor, vec![])?;

    let hyper = Hyperparams::defaults(3, 8);
    let chain = run_chain(11, &data, &hyper, 300, 150, 1, |_| {})?;

    let report = rank_report(&chain, 1e-3);
    println!("{}", format_rank_report(&report));

    for entry in report.iter().filter(|entry| entry.active) {
        println!("component {} (weight {:.1}):", entry.component, entry.weight);
        for mode in 1..=3 {
            let top = top_entities(&chain, mode, entry.component, 5)?;
            let ids: Vec<String> = top
                .iter()
                .map(|(id, share)| format!("{id} ({share:.3})"))
                .collect();
            println!("  mode {mode}: {}", ids.join(", "));
        }
    }
    Ok(())
}
