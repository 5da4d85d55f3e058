//! Command-line front end: fit, predict, eval, synth, and report.
//!
//! Every command reads an optional `key = value` configuration file and
//! applies `--set key=value` overrides on top (later flags win). Outputs
//! go to fixed filenames under the configured output directory.
//!
//! Exit codes: 0 on success, 2 for configuration problems (including
//! resource-budget refusals), 3 for data problems (unreadable or
//! malformed files), 4 for undefined numerical results (e.g. ranking
//! metrics on a single-class test set).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use ztpcp::chain::ChainOutput;
use ztpcp::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointKind};
use ztpcp::config::{InferenceMode, RunConfig};
use ztpcp::error::Error;
use ztpcp::gibbs::run_chain;
use ztpcp::metrics::{
    auc_pr, auc_roc, format_metrics_table, format_rank_report, load_predictions, log_loss,
    pr_points, predict_set, rank_report, roc_points, top_entities, write_metrics_lines,
    write_predictions, write_xy, Prediction, PredictionMode,
};
use ztpcp::model::{SuffStats, TrainData};
use ztpcp::online::{run_online_chain, MinibatchSpec};
use ztpcp::synth::{generate, write_synth_files};
use ztpcp::tensor::{
    load_network, load_tensor, load_test_set, split_holdout, write_test_set, LabeledCells,
};

#[derive(Parser)]
#[command(
    name = "ztpcp",
    version,
    about = "Bayesian CP decomposition of sparse binary tensors",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 data error, \
                  4 undefined numerical result."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command.
#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable, later wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shortcut for `--set out_dir=...`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Shortcut for `--set checkpoint=...`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Shortcut for `--set test=...`.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Shortcut for `--set predictions=...`.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Shortcut for `--set seed=...`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shortcut for `--set threads=...`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write checkpoints, a rank report, and a progress
    /// log (plus the held-out test set when a holdout is configured).
    Fit(CommonArgs),
    /// Score a test set with a checkpoint, writing predictions.txt.
    Predict(CommonArgs),
    /// Compute AUC-ROC, AUC-PR, and log-loss from a predictions file or
    /// from a checkpoint plus test set; writes metrics and curve files.
    Eval(CommonArgs),
    /// Generate a synthetic data set with known ground truth.
    Synth(CommonArgs),
    /// Print the strongest entities of one mode for each active component.
    Report(ReportArgs),
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// 1-based mode whose entities are listed.
    #[arg(long, default_value_t = 1)]
    mode: usize,
    /// Entities per component.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn build_config(args: &CommonArgs) -> ztpcp::error::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(&args.set)?;
    if let Some(dir) = &args.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(path) = &args.checkpoint {
        config.checkpoint = Some(path.clone());
    }
    if let Some(path) = &args.test {
        config.test = Some(path.clone());
    }
    if let Some(path) = &args.predictions {
        config.predictions = Some(path.clone());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if config.threads > 0 {
        // Ignore a second initialization (only possible in-process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global();
    }
    Ok(config)
}

fn ensure_out_dir(config: &RunConfig) -> ztpcp::error::Result<()> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

fn load_train_data(config: &RunConfig) -> ztpcp::error::Result<(TrainData, LabeledCells)> {
    let tensor_path = config
        .tensor
        .as_ref()
        .ok_or_else(|| Error::Config("fit needs `tensor = <path>`".into()))?;
    if config.shape.len() < 2 {
        return Err(Error::Config("fit needs `shape = <n1> <n2> ...`".into()));
    }
    let full = load_tensor(tensor_path, config.shape.clone())?;
    let mut networks = Vec::new();
    for (mode, path) in &config.networks {
        if *mode == 0 || *mode > config.shape.len() {
            return Err(Error::Config(format!(
                "network mode {mode} out of range for a tensor of order {}",
                config.shape.len()
            )));
        }
        networks.push(load_network(path, *mode, config.shape[*mode - 1])?);
    }
    let (train, test) = match config.split_spec()? {
        Some(spec) => split_holdout(&full, &spec, config.zeros_per_one)?,
        None => (full, Vec::new()),
    };
    Ok((TrainData::new(train, networks)?, test))
}

fn minibatch_spec(config: &RunConfig, data: &TrainData) -> MinibatchSpec {
    let mut spec = MinibatchSpec::tenth(data);
    if let Some(batch) = config.minibatch {
        spec.batch = batch;
    }
    if let Some(net_batch) = config.net_minibatch {
        for (slot, net) in spec.net_batch.iter_mut().zip(&data.networks) {
            *slot = net_batch.min(net.edge_count());
        }
    }
    spec.reweight = config.reweight;
    spec.m_samples = config.m_samples;
    spec.summary = config.summary;
    spec.decay = config.decay;
    spec
}

fn cmd_fit(args: &CommonArgs) -> ztpcp::error::Result<()> {
    let config = build_config(args)?;
    ensure_out_dir(&config)?;
    let (data, test) = load_train_data(&config)?;
    let hyper = config.hyperparams(config.shape.len());

    let progress_path = config.out_dir.join("progress.log");
    let progress_file =
        std::fs::File::create(&progress_path).map_err(|e| Error::io(&progress_path, e))?;
    let mut progress_out = std::io::BufWriter::new(progress_file);
    let on_progress = |record: &ztpcp::chain::ProgressRecord| {
        use std::io::Write as _;
        let _ = writeln!(progress_out, "{}", record.to_line());
    };

    let chain = match config.mode {
        InferenceMode::Batch => run_chain(
            config.seed,
            &data,
            &hyper,
            config.iters,
            config.burnin,
            config.thin,
            on_progress,
        )?,
        InferenceMode::Online => {
            let spec = minibatch_spec(&config, &data);
            run_online_chain(
                config.seed,
                &data,
                &hyper,
                &spec,
                config.iters,
                config.burnin,
                config.thin,
                on_progress,
            )?
        }
    };

    let final_path = config.out_dir.join("checkpoint.txt");
    write_checkpoint(
        &final_path,
        &Checkpoint {
            kind: CheckpointKind::Final,
            shape: chain.shape.clone(),
            rank: chain.rank,
            iteration: chain.iters as u64,
            seed: chain.seed,
            networks: chain.network_modes.clone(),
            params: chain.final_params.clone(),
            suff: chain.final_suff.clone(),
        },
    )?;
    let mean_path = config.out_dir.join("mean_checkpoint.txt");
    write_checkpoint(
        &mean_path,
        &Checkpoint {
            kind: CheckpointKind::Mean,
            shape: chain.shape.clone(),
            rank: chain.rank,
            iteration: chain.iters as u64,
            seed: chain.seed,
            networks: chain.network_modes.clone(),
            params: chain.mean.clone(),
            suff: SuffStats::zeroed_dims(
                &chain.shape,
                chain.rank,
                &chain.network_modes.iter().map(|&(_, n)| n).collect::<Vec<_>>(),
            ),
        },
    )?;

    let report = rank_report(&chain, config.prune_tau);
    let report_path = config.out_dir.join("rank_report.txt");
    std::fs::write(&report_path, format_rank_report(&report))
        .map_err(|e| Error::io(&report_path, e))?;

    if !test.is_empty() {
        write_test_set(config.out_dir.join("heldout.txt"), &test)?;
    }

    let active = report.iter().filter(|e| e.active).count();
    println!(
        "fit: {} iterations ({} burn-in, thin {}), {} stored samples, {} of {} components active",
        chain.iters,
        chain.burnin,
        chain.thin,
        chain.samples.len(),
        active,
        chain.rank
    );
    println!("fit: wrote {}", final_path.display());
    println!("fit: wrote {}", mean_path.display());
    println!("fit: wrote {}", report_path.display());
    println!("fit: wrote {}", progress_path.display());
    if !test.is_empty() {
        println!("fit: wrote {} ({} held-out cells)", config.out_dir.join("heldout.txt").display(), test.len());
    }
    Ok(())
}

fn checkpoint_chain(config: &RunConfig) -> ztpcp::error::Result<ChainOutput> {
    let path = config
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("need `checkpoint = <path>` (or --checkpoint)".into()))?;
    Ok(read_checkpoint(path)?.into_chain())
}

fn predictions_for(config: &RunConfig) -> ztpcp::error::Result<Vec<Prediction>> {
    let chain = checkpoint_chain(config)?;
    let test_path = config
        .test
        .as_ref()
        .ok_or_else(|| Error::Config("need `test = <path>` (or --test)".into()))?;
    let cells = load_test_set(test_path, &chain.shape)?;
    let mode = if config.plug_in {
        PredictionMode::PlugIn
    } else {
        PredictionMode::Averaged
    };
    predict_set(&chain, &cells, mode)
}

fn cmd_predict(args: &CommonArgs) -> ztpcp::error::Result<()> {
    let config = build_config(args)?;
    ensure_out_dir(&config)?;
    let preds = predictions_for(&config)?;
    let path = config.out_dir.join("predictions.txt");
    write_predictions(&path, &preds)?;
    println!("predict: wrote {} ({} cells)", path.display(), preds.len());
    Ok(())
}

fn cmd_eval(args: &CommonArgs) -> ztpcp::error::Result<()> {
    let config = build_config(args)?;
    ensure_out_dir(&config)?;
    let preds = match &config.predictions {
        Some(path) => load_predictions(path)?,
        None => predictions_for(&config)?,
    };
    let metrics = [
        ("auc_roc", auc_roc(&preds)?),
        ("auc_pr", auc_pr(&preds)?),
        ("log_loss", log_loss(&preds)?),
    ];
    let table = format_metrics_table(&metrics);
    let table_path = config.out_dir.join("metrics.txt");
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    write_metrics_lines(&config.out_dir.join("metrics.dat"), &metrics)?;
    write_xy(&config.out_dir.join("roc.dat"), &roc_points(&preds)?)?;
    write_xy(&config.out_dir.join("pr.dat"), &pr_points(&preds)?)?;
    print!("{table}");
    println!(
        "eval: wrote metrics.txt, metrics.dat, roc.dat, pr.dat under {}",
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_synth(args: &CommonArgs) -> ztpcp::error::Result<()> {
    let config = build_config(args)?;
    let spec = config.synth_spec()?;
    let out = generate(&spec)?;
    let written = write_synth_files(&out, &config.out_dir)?;
    println!(
        "synth: {} ones over {} cells (expected {:.1}), {} networks",
        out.tensor.nnz(),
        out.tensor.cell_count(),
        out.expected_ones,
        out.networks.len()
    );
    for path in written {
        println!("synth: wrote {}", path.display());
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> ztpcp::error::Result<()> {
    let config = build_config(&args.common)?;
    ensure_out_dir(&config)?;
    let chain = checkpoint_chain(&config)?;
    let ranks = rank_report(&chain, config.prune_tau);
    let mut text = String::new();
    for entry in ranks.iter().filter(|e| e.active) {
        text.push_str(&format!(
            "component {} weight {:.6}\n",
            entry.component, entry.weight
        ));
        for (id, loading) in top_entities(&chain, args.mode, entry.component, args.top)? {
            text.push_str(&format!("  entity {id:<6} {loading:.6}\n"));
        }
    }
    let path = config.out_dir.join("report.txt");
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    print!("{text}");
    println!("report: wrote {}", path.display());
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Budget(_) => 2,
        Error::Io { .. } | Error::Parse { .. } => 3,
        Error::Metric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
