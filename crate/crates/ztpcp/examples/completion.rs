//! Tensor completion: hold out entries, fit, score the held-out set.
//!
//! A random tenth of the one-entries is hidden together with an equal
//! number of sampled zeros. The chain never sees the held-out cells;
//! after fitting, posterior-averaged probabilities are ranked against
//! the true labels with AUC-ROC and AUC-PR.
//!
//! Run with: `cargo run --release --example completion`

use ztpcp::gibbs::run_chain;
use ztpcp::metrics::{auc_pr, auc_roc, log_loss, predict_set, PredictionMode};
use ztpcp::model::TrainData;
use ztpcp::synth::{generate, SynthSpec};
use ztpcp::tensor::{split_holdout, SplitSpec};
use ztpcp::Hyperparams;

fn main() -> ztpcp::Result<()> {
    let mut spec = SynthSpec::new(vec![50, 50, 20], 3, 42);
    spec.lambda = Some(vec![900.0, 700.0, 500.0]);
    spec.hyper.a = vec![0.2; 3];
    let synth = generate(&spec)?;

    let split = SplitSpec::RandomEntry { fraction: 0.1, seed: 42 };
    let (train, test) = split_holdout(&synth.tensor, &split, 1.0)?;
    println!(
        "train: {} ones, test: {} cells ({} positive)",
        train.nnz(),
        test.len(),
        test.iter().filter(|(_, label)| *label == 1).count(),
    );

    let data = TrainData::new(train, vec![])?;
    let hyper = Hyperparams::defaults(3, 10);
    let chain = run_chain(11, &data, &hyper, 400, 200, 1, |record| {
        if record.iteration % 100 == 0 {
            println!("{}", record.to_line());
        }
    })?;

    let predictions = predict_set(&chain, &test, PredictionMode::Averaged)?;
    println!("\nheld-out AUC-ROC: {:.4}", auc_roc(&predictions)?);
    println!("held-out AUC-PR:  {:.4}", auc_pr(&predictions)?);
    println!("held-out log-loss: {:.4}", log_loss(&predictions)?);
    Ok(())
}
