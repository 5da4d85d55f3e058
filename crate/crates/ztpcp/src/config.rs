//! Run configuration: a `key = value` file with documented defaults,
//! where any value can be overridden afterwards (the command line does
//! this with repeated `--set key=value` flags).

use crate::error::{Error, Result};
use crate::online::SummaryMode;
use crate::tensor::SplitSpec;
use std::path::{Path, PathBuf};

/// Which sampler a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    /// Full-data iterations.
    Batch,
    /// Minibatch iterations with streaming statistics.
    Online,
}

/// Held-out split requested in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum HoldoutSpec {
    /// Train on everything.
    None,
    /// `holdout = random <fraction>`.
    Random { fraction: f64 },
    /// `holdout = coldstart <mode> <start> <end>` (half-open entity range).
    ColdStart { mode: usize, start: usize, end: usize },
}

/// Every tunable of a run, with one `key = value` line per field.
///
/// Defaults (applied before the file is read): `rank = 20`,
/// `iters = 1000`, `burnin = 500`, `thin = 1`, `seed = 42`,
/// `mode = batch`, `reweight = true`, `m_samples = 1`,
/// `summary = analytic`, `zeros_per_one = 1`, `prune_tau = 0.001`,
/// `holdout = none`, `plug_in = false`, `threads = 0` (let the runtime
/// decide), `out_dir = .`, and no data paths. Unset `minibatch` /
/// `net_minibatch` mean one tenth of the ones / edges. Unset `decay`
/// defers to the reweight flag. The hyperparameter keys `a`, `c`,
/// `epsilon`, `g`, `d`, `alpha`, `f` override the model defaults as
/// scalars (`a` per run, broadcast over modes; `g`, `f` broadcast over
/// components).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Training tensor file.
    pub tensor: Option<PathBuf>,
    /// Mode sizes, outermost first.
    pub shape: Vec<usize>,
    /// `(mode, path)` per similarity network.
    pub networks: Vec<(usize, PathBuf)>,
    pub rank: usize,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub mode: InferenceMode,
    /// One-entries per online minibatch; `None` means one tenth.
    pub minibatch: Option<usize>,
    /// Edges per online network minibatch; `None` means one tenth.
    pub net_minibatch: Option<usize>,
    pub m_samples: usize,
    pub reweight: bool,
    /// Streaming-statistics retention factor override.
    pub decay: Option<f64>,
    pub summary: SummaryMode,
    /// Sampled zero cells per held-out one when splitting.
    pub zeros_per_one: f64,
    /// Active-component threshold as a fraction of the largest weight.
    pub prune_tau: f64,
    pub holdout: HoldoutSpec,
    /// Predict with the mean parameters instead of averaging samples.
    pub plug_in: bool,
    /// Worker threads; 0 picks the runtime default. Any fixed value,
    /// including 1, reproduces the same numbers bit for bit.
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Checkpoint consumed by predict/eval/report.
    pub checkpoint: Option<PathBuf>,
    /// Test-set file consumed by predict/eval.
    pub test: Option<PathBuf>,
    /// Predictions file consumed by eval.
    pub predictions: Option<PathBuf>,
    /// Scalar hyperparameter overrides; `None` keeps the model default.
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub g: Option<f64>,
    pub d: Option<f64>,
    pub alpha: Option<f64>,
    pub f: Option<f64>,
    /// Generator only: explicit component weights (`lambda = 600 700`).
    pub lambda: Option<Vec<f64>>,
    /// Generator only: explicit network weights.
    pub beta: Option<Vec<f64>>,
    /// Generator only: modes that get a synthetic network
    /// (`synth_networks = 1 2`).
    pub synth_networks: Vec<usize>,
    /// Generator only: cell-enumeration budget.
    pub max_cells: u64,
    /// Generator only: expected-ones budget.
    pub max_expected_ones: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tensor: None,
            shape: Vec::new(),
            networks: Vec::new(),
            rank: 20,
            iters: 1000,
            burnin: 500,
            thin: 1,
            seed: 42,
            mode: InferenceMode::Batch,
            minibatch: None,
            net_minibatch: None,
            m_samples: 1,
            reweight: true,
            decay: None,
            summary: SummaryMode::AnalyticMean,
            zeros_per_one: 1.0,
            prune_tau: 1e-3,
            holdout: HoldoutSpec::None,
            plug_in: false,
            threads: 0,
            out_dir: PathBuf::from("."),
            checkpoint: None,
            test: None,
            predictions: None,
            a: None,
            c: None,
            epsilon: None,
            g: None,
            d: None,
            alpha: None,
            f: None,
            lambda: None,
            beta: None,
            synth_networks: Vec::new(),
            max_cells: crate::synth::DEFAULT_MAX_CELLS,
            max_expected_ones: crate::synth::DEFAULT_MAX_EXPECTED_ONES,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value for {key}: {value:?} (want true/false)"))),
    }
}

impl RunConfig {
    /// Defaults plus the settings in a `key = value` file. Lines may be
    /// blank or `#` comments; `network` may repeat, everything else
    /// overwrites.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, no + 1, format!("expected key = value, got {raw:?}"))
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, no + 1, e.to_string()))?;
        }
        Ok(config)
    }

    /// Apply `key=value` overrides in order (later wins).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("override must look like key=value, got {item:?}"))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tensor" => self.tensor = Some(PathBuf::from(value)),
            "shape" => {
                self.shape = value
                    .split_whitespace()
                    .map(|t| parse_value::<usize>("shape", t))
                    .collect::<Result<_>>()?;
                if self.shape.len() < 2 {
                    return Err(Error::Config(format!(
                        "shape needs at least 2 mode sizes, got {value:?}"
                    )));
                }
            }
            "network" => {
                let (mode, path) = value.split_once(char::is_whitespace).ok_or_else(|| {
                    Error::Config(format!("network wants `<mode> <path>`, got {value:?}"))
                })?;
                self.networks
                    .push((parse_value("network mode", mode.trim())?, PathBuf::from(path.trim())));
            }
            "rank" => self.rank = parse_value(key, value)?,
            "iters" => self.iters = parse_value(key, value)?,
            "burnin" => self.burnin = parse_value(key, value)?,
            "thin" => self.thin = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "mode" => {
                self.mode = match value {
                    "batch" => InferenceMode::Batch,
                    "online" => InferenceMode::Online,
                    _ => {
                        return Err(Error::Config(format!(
                            "mode must be batch or online, got {value:?}"
                        )))
                    }
                }
            }
            "minibatch" => self.minibatch = Some(parse_value(key, value)?),
            "net_minibatch" => self.net_minibatch = Some(parse_value(key, value)?),
            "m_samples" => self.m_samples = parse_value(key, value)?,
            "reweight" => self.reweight = parse_bool(key, value)?,
            "decay" => self.decay = Some(parse_value(key, value)?),
            "summary" => {
                self.summary = match value {
                    "analytic" => SummaryMode::AnalyticMean,
                    "samples" => SummaryMode::SampleAverage,
                    _ => {
                        return Err(Error::Config(format!(
                            "summary must be analytic or samples, got {value:?}"
                        )))
                    }
                }
            }
            "zeros_per_one" => self.zeros_per_one = parse_value(key, value)?,
            "prune_tau" => self.prune_tau = parse_value(key, value)?,
            "holdout" => {
                let tokens: Vec<&str> = value.split_whitespace().collect();
                self.holdout = match tokens.as_slice() {
                    ["none"] => HoldoutSpec::None,
                    ["random", fraction] => HoldoutSpec::Random {
                        fraction: parse_value("holdout fraction", fraction)?,
                    },
                    ["coldstart", mode, start, end] => HoldoutSpec::ColdStart {
                        mode: parse_value("holdout mode", mode)?,
                        start: parse_value("holdout start", start)?,
                        end: parse_value("holdout end", end)?,
                    },
                    _ => {
                        return Err(Error::Config(format!(
                            "holdout wants `none`, `random <fraction>`, or \
                             `coldstart <mode> <start> <end>`, got {value:?}"
                        )))
                    }
                };
            }
            "plug_in" => self.plug_in = parse_bool(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "predictions" => self.predictions = Some(PathBuf::from(value)),
            "a" => self.a = Some(parse_value(key, value)?),
            "c" => self.c = Some(parse_value(key, value)?),
            "epsilon" => self.epsilon = Some(parse_value(key, value)?),
            "g" => self.g = Some(parse_value(key, value)?),
            "d" => self.d = Some(parse_value(key, value)?),
            "alpha" => self.alpha = Some(parse_value(key, value)?),
            "f" => self.f = Some(parse_value(key, value)?),
            "lambda" => {
                self.lambda = Some(
                    value
                        .split_whitespace()
                        .map(|t| parse_value::<f64>("lambda", t))
                        .collect::<Result<_>>()?,
                )
            }
            "beta" => {
                self.beta = Some(
                    value
                        .split_whitespace()
                        .map(|t| parse_value::<f64>("beta", t))
                        .collect::<Result<_>>()?,
                )
            }
            "synth_networks" => {
                self.synth_networks = value
                    .split_whitespace()
                    .map(|t| parse_value::<usize>("synth_networks", t))
                    .collect::<Result<_>>()?
            }
            "max_cells" => self.max_cells = parse_value(key, value)?,
            "max_expected_ones" => self.max_expected_ones = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Model hyperparameters for this run: defaults for the given order
    /// and this config's rank, with any scalar overrides applied.
    pub fn hyperparams(&self, order: usize) -> crate::model::Hyperparams {
        let mut hyper = crate::model::Hyperparams::defaults(order, self.rank);
        if let Some(a) = self.a {
            hyper.a = vec![a; order];
        }
        if let Some(c) = self.c {
            hyper.c = c;
        }
        if let Some(epsilon) = self.epsilon {
            hyper.epsilon = epsilon;
        }
        if let Some(g) = self.g {
            hyper.g = vec![g; self.rank];
        }
        if let Some(d) = self.d {
            hyper.d = d;
        }
        if let Some(alpha) = self.alpha {
            hyper.alpha = alpha;
        }
        if let Some(f) = self.f {
            hyper.f = vec![f; self.rank];
        }
        hyper
    }

    /// This configuration as a generator spec (`shape`, `rank`, `seed`,
    /// the hyperparameters, and the generator-only keys).
    pub fn synth_spec(&self) -> Result<crate::synth::SynthSpec> {
        if self.shape.len() < 2 {
            return Err(Error::Config(
                "generation needs a shape with at least 2 mode sizes".into(),
            ));
        }
        Ok(crate::synth::SynthSpec {
            shape: self.shape.clone(),
            rank: self.rank,
            hyper: self.hyperparams(self.shape.len()),
            factors: None,
            lambda: self.lambda.clone(),
            beta: self.beta.clone(),
            networks: self.synth_networks.clone(),
            seed: self.seed,
            max_cells: self.max_cells,
            max_expected_ones: self.max_expected_ones,
        })
    }

    /// The holdout request as a tensor split, if any.
    pub fn split_spec(&self) -> Result<Option<SplitSpec>> {
        Ok(match self.holdout {
            HoldoutSpec::None => None,
            HoldoutSpec::Random { fraction } => Some(SplitSpec::RandomEntry {
                fraction,
                seed: self.seed,
            }),
            HoldoutSpec::ColdStart { mode, start, end } => Some(SplitSpec::ColdStartSlice {
                mode,
                range: (start, end),
                seed: self.seed,
            }),
        })
    }
}
