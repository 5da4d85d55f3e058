//! Held-out evaluation: predicted probabilities from a fitted chain,
//! ranking metrics (AUC-ROC, AUC-PR, log-loss), curve points, component
//! rank reports, and per-component top-entity listings.

use crate::chain::ChainOutput;
use crate::error::{Error, Result};
use crate::model::{bernoulli_prob, cp_rate};
use crate::tensor::TensorIndex;
use std::io::{BufRead as _, BufWriter, Write as _};
use std::path::Path;

/// Probabilities are clamped to this interval inside [`log_loss`] so a
/// confidently wrong prediction stays finite.
pub const LOG_LOSS_CLAMP: f64 = 1e-15;

/// One evaluated cell: where it is, what was observed, what was predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: TensorIndex,
    /// Observed value, 0 or 1.
    pub label: u8,
    /// Predicted probability that the value is 1.
    pub prob: f64,
}

/// How a chain turns posterior information into a cell probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Average `1 - exp(-rate)` over the stored parameter samples
    /// (posterior predictive; the default).
    Averaged,
    /// Evaluate `1 - exp(-rate)` once at the running-mean parameters.
    PlugIn,
}

fn check_index(chain: &ChainOutput, index: &TensorIndex) -> Result<()> {
    if index.len() != chain.shape.len() {
        return Err(Error::Config(format!(
            "index has {} coordinates, tensor has {} modes",
            index.len(),
            chain.shape.len()
        )));
    }
    for (k, (&coord, &size)) in index.iter().zip(&chain.shape).enumerate() {
        if coord >= size {
            return Err(Error::Config(format!(
                "mode-{} coordinate {coord} out of range (size {size})",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Predicted probability that the cell at `index` is a one.
///
/// [`PredictionMode::Averaged`] requires at least one stored sample. A
/// chain with a single stored sample gives exactly `1 - exp(-rate)` at
/// that sample.
pub fn predict_prob(chain: &ChainOutput, index: &TensorIndex, mode: PredictionMode) -> Result<f64> {
    check_index(chain, index)?;
    match mode {
        PredictionMode::Averaged => {
            if chain.samples.is_empty() {
                return Err(Error::Config(
                    "chain holds no stored samples; rerun with more iterations or use plug-in prediction"
                        .into(),
                ));
            }
            let sum: f64 = chain
                .samples
                .iter()
                .map(|s| bernoulli_prob(cp_rate(index, &s.factors, &s.weights)))
                .sum();
            Ok(sum / chain.samples.len() as f64)
        }
        PredictionMode::PlugIn => Ok(bernoulli_prob(cp_rate(
            index,
            &chain.mean.factors,
            &chain.mean.weights,
        ))),
    }
}

/// Predict every labelled cell of a test set.
pub fn predict_set(
    chain: &ChainOutput,
    cells: &[(TensorIndex, u8)],
    mode: PredictionMode,
) -> Result<Vec<Prediction>> {
    cells
        .iter()
        .map(|(index, label)| {
            Ok(Prediction {
                index: index.clone(),
                label: *label,
                prob: predict_prob(chain, index, mode)?,
            })
        })
        .collect()
}

fn class_counts(preds: &[Prediction], metric: &str) -> Result<(usize, usize)> {
    let pos = preds.iter().filter(|p| p.label == 1).count();
    let neg = preds.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "{metric} needs both classes; test set has {pos} positives and {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve: the probability that a random positive
/// outscores a random negative, with ties counting one half.
///
/// Computed from rank sums with average ranks over tie groups, which is
/// exactly the pairwise count at a fraction of the cost.
pub fn auc_roc(preds: &[Prediction]) -> Result<f64> {
    let (pos, neg) = class_counts(preds, "AUC-ROC")?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| preds[i].prob.partial_cmp(&preds[j].prob).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && preds[order[j]].prob == preds[order[i]].prob {
            j += 1;
        }
        // Ranks are 1-based; everyone in the tie group gets the average.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &n in &order[i..j] {
            if preds[n].label == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Walk the predictions in descending score order, yielding per tie
/// group the cumulative (true positives, false positives).
fn descending_groups(preds: &[Prediction]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| preds[j].prob.partial_cmp(&preds[i].prob).unwrap());
    let mut steps = Vec::new();
    let mut tp = 0;
    let mut fp = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && preds[order[j]].prob == preds[order[i]].prob {
            if preds[order[j]].label == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        steps.push((tp, fp));
        i = j;
    }
    steps
}

/// Area under the precision-recall curve, non-interpolated: a sweep over
/// descending scores where each tie group enters as one step and
/// contributes `(recall gain) x (precision after the group)`.
///
/// With every score tied the area is exactly the positive prevalence.
pub fn auc_pr(preds: &[Prediction]) -> Result<f64> {
    let (pos, _) = class_counts(preds, "AUC-PR")?;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in descending_groups(preds) {
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Mean negative Bernoulli log-likelihood of the labels under the
/// predicted probabilities, clamped away from 0 and 1.
pub fn log_loss(preds: &[Prediction]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Metric("log-loss is undefined on an empty test set".into()));
    }
    let sum: f64 = preds
        .iter()
        .map(|p| {
            let q = p.prob.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP);
            if p.label == 1 {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(sum / preds.len() as f64)
}

/// ROC curve points `(false positive rate, true positive rate)`, one per
/// distinct score plus the `(0,0)` and `(1,1)` endpoints.
pub fn roc_points(preds: &[Prediction]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_counts(preds, "ROC curve")?;
    let mut points = vec![(0.0, 0.0)];
    for (tp, fp) in descending_groups(preds) {
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }
    Ok(points)
}

/// Precision-recall curve points `(recall, precision)`, one per distinct
/// score in descending order.
pub fn pr_points(preds: &[Prediction]) -> Result<Vec<(f64, f64)>> {
    let (pos, _) = class_counts(preds, "PR curve")?;
    let mut points = Vec::new();
    for (tp, fp) in descending_groups(preds) {
        points.push((tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64));
    }
    Ok(points)
}

/// One line of a component rank report.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    /// Zero-based component (column) number.
    pub component: usize,
    /// Posterior-mean component weight.
    pub weight: f64,
    /// Whether the weight exceeds `threshold x max weight`.
    pub active: bool,
}

/// Components sorted by descending posterior-mean weight, each flagged
/// active when its weight exceeds `threshold` times the largest.
pub fn rank_report(chain: &ChainOutput, threshold: f64) -> Vec<RankEntry> {
    let lambda = &chain.mean.weights.lambda;
    let max = lambda.iter().cloned().fold(0.0, f64::max);
    let mut entries: Vec<RankEntry> = lambda
        .iter()
        .enumerate()
        .map(|(component, &weight)| RankEntry {
            component,
            weight,
            active: weight > threshold * max,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap()
            .then(a.component.cmp(&b.component))
    });
    entries
}

/// Number of active components in a rank report.
pub fn active_rank(report: &[RankEntry]) -> usize {
    report.iter().filter(|e| e.active).count()
}

/// Render a rank report as an aligned text table.
pub fn format_rank_report(report: &[RankEntry]) -> String {
    let mut out = String::from("component  weight                  active\n");
    for e in report {
        out.push_str(&format!(
            "{:<10} {:<23.16e} {}\n",
            e.component,
            e.weight,
            if e.active { "yes" } else { "no" }
        ));
    }
    out
}

/// The `n` entities with the largest posterior-mean loading in one
/// component of one mode, as `(entity id, loading)` pairs.
///
/// Ties break toward the smaller id; `n` is clamped to the mode size.
pub fn top_entities(
    chain: &ChainOutput,
    mode: usize,
    component: usize,
    n: usize,
) -> Result<Vec<(usize, f64)>> {
    if mode == 0 || mode > chain.shape.len() {
        return Err(Error::Config(format!(
            "mode must lie in 1..={}, got {mode}",
            chain.shape.len()
        )));
    }
    if component >= chain.rank {
        return Err(Error::Config(format!(
            "component must lie below the rank {}, got {component}",
            chain.rank
        )));
    }
    let column = chain.mean.factors[mode - 1].column(component);
    let mut ids: Vec<usize> = (0..column.len()).collect();
    ids.sort_by(|&i, &j| {
        column[j]
            .partial_cmp(&column[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    ids.truncate(n.min(column.len()));
    Ok(ids.into_iter().map(|i| (i, column[i])).collect())
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    Ok(BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Write named metrics as line-oriented records, one `name value` pair
/// per line with full float precision.
pub fn write_metrics_lines(path: &Path, metrics: &[(&str, f64)]) -> Result<()> {
    let mut out = create(path)?;
    for (name, value) in metrics {
        writeln!(out, "{name} {value:.16e}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Render named metrics as an aligned text table.
pub fn format_metrics_table(metrics: &[(&str, f64)]) -> String {
    let width = metrics.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}  value\n", "metric", width = width);
    for (name, value) in metrics {
        out.push_str(&format!("{name:<width$}  {value:.6}\n", width = width));
    }
    out
}

/// Write curve points as a two-column plot-data file.
pub fn write_xy(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut out = create(path)?;
    for (x, y) in points {
        writeln!(out, "{x:.16e} {y:.16e}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write predictions, one line per cell: the coordinates, the observed
/// label, and the probability with full float precision.
pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut out = create(path)?;
    for p in preds {
        let coords: Vec<String> = p.index.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{} {} {:.16e}", coords.join(" "), p.label, p.prob)
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a predictions file written by [`write_predictions`]: per line,
/// coordinates, a 0/1 label, and a probability.
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut preds = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = no + 1;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(Error::parse(
                path,
                line_no,
                "need at least two coordinates, a label, and a probability",
            ));
        }
        let coords = &tokens[..tokens.len() - 2];
        let index: TensorIndex = coords
            .iter()
            .map(|t| {
                t.parse::<usize>().map_err(|_| {
                    Error::parse(path, line_no, format!("bad coordinate {t:?}"))
                })
            })
            .collect::<Result<_>>()?;
        let label: u8 = match tokens[tokens.len() - 2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::parse(path, line_no, format!("label must be 0 or 1, got {other:?}")))
            }
        };
        let prob: f64 = tokens[tokens.len() - 1].parse().map_err(|_| {
            Error::parse(path, line_no, format!("bad probability {:?}", tokens[tokens.len() - 1]))
        })?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::parse(path, line_no, format!("probability {prob} outside [0, 1]")));
        }
        preds.push(Prediction { index, label, prob });
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainOutput, ParamsSnapshot};
    use crate::model::{FactorMatrix, GlobalWeights};

    /// A rank-1 chain over a 1x1 tensor whose r-th sample has total rate
    /// `rates[r]`; the mean holds the average rate.
    fn unit_chain(rates: &[f64]) -> ChainOutput {
        let snapshot = |rate: f64| ParamsSnapshot {
            factors: vec![
                FactorMatrix::from_data(1, 1, 1, vec![1.0]).unwrap(),
                FactorMatrix::from_data(2, 1, 1, vec![1.0]).unwrap(),
            ],
            weights: GlobalWeights {
                lambda: vec![rate],
                p: vec![0.5],
            },
            net_weights: vec![],
        };
        let mean_rate = if rates.is_empty() {
            1.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        };
        ChainOutput {
            shape: vec![1, 1],
            network_modes: vec![],
            rank: 1,
            seed: 0,
            iters: rates.len().max(1),
            burnin: 0,
            thin: 1,
            samples: rates.iter().map(|&r| snapshot(r)).collect(),
            mean: snapshot(mean_rate),
            final_params: snapshot(mean_rate),
            final_suff: crate::model::SuffStats::zeroed_dims(&[1, 1], 1, &[]),
            progress: vec![],
            floored_rate_events: 0,
        }
    }

    fn preds(pairs: &[(u8, f64)]) -> Vec<Prediction> {
        pairs
            .iter()
            .map(|&(label, prob)| Prediction {
                index: vec![0, 0],
                label,
                prob,
            })
            .collect()
    }

    #[test]
    fn averaged_prediction_is_mean_of_per_sample_probabilities() {
        // Rates ln 2 and ln 4 give per-sample probabilities 1/2 and 3/4,
        // so the posterior-predictive probability is 5/8.
        let chain = unit_chain(&[2.0f64.ln(), 4.0f64.ln()]);
        let p = predict_prob(&chain, &vec![0, 0], PredictionMode::Averaged).unwrap();
        assert!((p - 0.625).abs() < 1e-15);
    }

    #[test]
    fn single_sample_prediction_is_the_bernoulli_probability() {
        let chain = unit_chain(&[2.0f64.ln()]);
        let p = predict_prob(&chain, &vec![0, 0], PredictionMode::Averaged).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        // Plug-in at the mean (same single rate) agrees.
        let q = predict_prob(&chain, &vec![0, 0], PredictionMode::PlugIn).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prediction_needs_samples_and_valid_index() {
        let chain = unit_chain(&[]);
        assert!(predict_prob(&chain, &vec![0, 0], PredictionMode::Averaged).is_err());
        // Plug-in works from the mean alone.
        predict_prob(&chain, &vec![0, 0], PredictionMode::PlugIn).unwrap();
        let chain = unit_chain(&[1.0]);
        assert!(predict_prob(&chain, &vec![0], PredictionMode::Averaged).is_err());
        assert!(predict_prob(&chain, &vec![0, 1], PredictionMode::Averaged).is_err());
    }

    #[test]
    fn prediction_grows_with_weight() {
        let lo = unit_chain(&[0.5]);
        let hi = unit_chain(&[2.0]);
        let p_lo = predict_prob(&lo, &vec![0, 0], PredictionMode::Averaged).unwrap();
        let p_hi = predict_prob(&hi, &vec![0, 0], PredictionMode::Averaged).unwrap();
        assert!(p_hi > p_lo);
    }

    #[test]
    fn roc_matches_hand_computed_example() {
        // Labels (1,0,1,0) with scores (0.9, 0.8, 0.4, 0.1): of the four
        // positive-negative pairs, three rank the positive higher.
        let p = preds(&[(1, 0.9), (0, 0.8), (1, 0.4), (0, 0.1)]);
        assert!((auc_roc(&p).unwrap() - 0.75).abs() < 1e-15);
        // Same example under the PR sweep: 1/2 + 1/2 * 2/3 = 5/6.
        assert!((auc_pr(&p).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_reversed_rankings() {
        let perfect = preds(&[(1, 0.9), (1, 0.8), (0, 0.2), (0, 0.1)]);
        assert_eq!(auc_roc(&perfect).unwrap(), 1.0);
        assert_eq!(auc_pr(&perfect).unwrap(), 1.0);
        let reversed = preds(&[(0, 0.9), (0, 0.8), (1, 0.2), (1, 0.1)]);
        assert_eq!(auc_roc(&reversed).unwrap(), 0.0);
    }

    #[test]
    fn all_tied_scores_give_half_roc_and_prevalence_pr() {
        let p = preds(&[(1, 0.3), (0, 0.3), (0, 0.3), (1, 0.3), (0, 0.3)]);
        assert_eq!(auc_roc(&p).unwrap(), 0.5);
        assert_eq!(auc_pr(&p).unwrap(), 0.4);
    }

    #[test]
    fn single_class_is_an_error_naming_the_metric() {
        let only_pos = preds(&[(1, 0.9), (1, 0.8)]);
        let err = auc_roc(&only_pos).unwrap_err().to_string();
        assert!(err.contains("AUC-ROC"), "got: {err}");
        let err = auc_pr(&only_pos).unwrap_err().to_string();
        assert!(err.contains("AUC-PR"), "got: {err}");
        assert!(roc_points(&only_pos).is_err());
        assert!(pr_points(&only_pos).is_err());
    }

    #[test]
    fn single_positive_ranked_last() {
        // Nine negatives outscore the lone positive: ROC area 0, PR area
        // equal to the precision of the final full-recall point, 1/10.
        let mut pairs: Vec<(u8, f64)> = (0..9).map(|i| (0u8, 0.9 - 0.05 * i as f64)).collect();
        pairs.push((1, 0.01));
        let p = preds(&pairs);
        assert_eq!(auc_roc(&p).unwrap(), 0.0);
        assert!((auc_pr(&p).unwrap() - 0.1).abs() < 1e-15);
    }

    /// Pairwise-count ROC oracle: wins plus half-ties over all
    /// positive-negative pairs.
    fn roc_by_pairs(preds: &[Prediction]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for a in preds.iter().filter(|p| p.label == 1) {
            for b in preds.iter().filter(|p| p.label == 0) {
                pairs += 1.0;
                if a.prob > b.prob {
                    wins += 1.0;
                } else if a.prob == b.prob {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    /// Threshold-recount PR oracle: precision and recall recomputed from
    /// scratch at every distinct score.
    fn pr_by_recount(preds: &[Prediction]) -> f64 {
        let mut scores: Vec<f64> = preds.iter().map(|p| p.prob).collect();
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        scores.dedup();
        let pos = preds.iter().filter(|p| p.label == 1).count() as f64;
        let mut area = 0.0;
        let mut prev_recall = 0.0;
        for &t in &scores {
            let tp = preds.iter().filter(|p| p.label == 1 && p.prob >= t).count() as f64;
            let hits = preds.iter().filter(|p| p.prob >= t).count() as f64;
            let recall = tp / pos;
            area += (recall - prev_recall) * (tp / hits);
            prev_recall = recall;
        }
        area
    }

    #[test]
    fn ranking_metrics_match_brute_force_on_tied_random_sets() {
        let mut rng = crate::rng::RngHandle::new(404, 40);
        use rand::Rng as _;
        for _ in 0..20 {
            let n = rng.gen_range(10..60);
            let mut pairs = Vec::with_capacity(n);
            let mut seen = [false; 2];
            for _ in 0..n {
                let label = rng.gen_range(0..2) as u8;
                seen[label as usize] = true;
                // A coarse score grid forces plenty of exact ties.
                let prob = rng.gen_range(0..11) as f64 / 10.0;
                pairs.push((label, prob));
            }
            if !(seen[0] && seen[1]) {
                continue;
            }
            let p = preds(&pairs);
            let fast = auc_roc(&p).unwrap();
            let slow = roc_by_pairs(&p);
            assert!((fast - slow).abs() < 1e-12, "roc {fast} vs {slow}");
            let fast = auc_pr(&p).unwrap();
            let slow = pr_by_recount(&p);
            assert!((fast - slow).abs() < 1e-12, "pr {fast} vs {slow}");
        }
    }

    #[test]
    fn ranking_metrics_ignore_monotone_score_transforms() {
        let p = preds(&[(1, 0.9), (0, 0.8), (1, 0.4), (1, 0.4), (0, 0.1), (0, 0.1)]);
        let q: Vec<Prediction> = p
            .iter()
            .map(|x| Prediction {
                prob: x.prob / 2.0 + 0.05,
                ..x.clone()
            })
            .collect();
        assert_eq!(auc_roc(&p).unwrap(), auc_roc(&q).unwrap());
        assert_eq!(auc_pr(&p).unwrap(), auc_pr(&q).unwrap());
    }

    #[test]
    fn log_loss_known_value_and_clamping() {
        let p = preds(&[(1, 0.5), (0, 0.5)]);
        assert!((log_loss(&p).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        let hopeless = preds(&[(1, 0.0)]);
        let ll = log_loss(&hopeless).unwrap();
        assert!(ll.is_finite());
        assert!((ll - (-LOG_LOSS_CLAMP.ln())).abs() < 1e-9);
        assert!(log_loss(&[]).is_err());
    }

    #[test]
    fn curve_points_have_expected_endpoints() {
        let p = preds(&[(1, 0.9), (0, 0.8), (1, 0.4), (0, 0.1)]);
        let roc = roc_points(&p).unwrap();
        assert_eq!(*roc.first().unwrap(), (0.0, 0.0));
        assert_eq!(*roc.last().unwrap(), (1.0, 1.0));
        // (0,0) plus one point per distinct score; the last group already
        // lands on (1,1), so nothing extra is appended.
        assert_eq!(roc.len(), 5);
        let pr = pr_points(&p).unwrap();
        assert_eq!(pr[0], (0.5, 1.0));
        assert_eq!(*pr.last().unwrap(), (1.0, 0.5));
    }

    #[test]
    fn rank_report_sorts_and_flags() {
        let mut chain = unit_chain(&[1.0]);
        chain.rank = 3;
        chain.mean.weights.lambda = vec![0.5, 2.0, 0.001];
        let report = rank_report(&chain, 1e-3);
        let ids: Vec<usize> = report.iter().map(|e| e.component).collect();
        assert_eq!(ids, vec![1, 0, 2]);
        let flags: Vec<bool> = report.iter().map(|e| e.active).collect();
        assert_eq!(flags, vec![true, true, false]);
        assert_eq!(active_rank(&report), 2);
        let text = format_rank_report(&report);
        assert!(text.starts_with("component"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn top_entities_tie_break_and_clamp() {
        let mut chain = unit_chain(&[1.0]);
        chain.shape = vec![4, 1];
        chain.mean.factors[0] =
            FactorMatrix::from_data(1, 4, 1, vec![0.25, 0.5, 0.125, 0.125]).unwrap();
        let top = top_entities(&chain, 1, 0, 3).unwrap();
        assert_eq!(top, vec![(1, 0.5), (0, 0.25), (2, 0.125)]);
        let all = top_entities(&chain, 1, 0, 100).unwrap();
        assert_eq!(all.len(), 4);
        assert!(top_entities(&chain, 0, 0, 3).is_err());
        assert!(top_entities(&chain, 3, 0, 3).is_err());
        assert!(top_entities(&chain, 1, 5, 3).is_err());
    }

    #[test]
    fn prediction_and_metric_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = vec![
            Prediction { index: vec![0, 3, 2], label: 1, prob: 0.1234567890123456 },
            Prediction { index: vec![1, 0, 0], label: 0, prob: 1e-300 },
        ];
        let path = dir.path().join("predictions.txt");
        write_predictions(&path, &p).unwrap();
        let back = load_predictions(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in p.iter().zip(&back) {
            assert_eq!(a.index, b.index);
            assert_eq!(a.label, b.label);
            assert_eq!(a.prob.to_bits(), b.prob.to_bits(), "17 significant digits round-trip");
        }

        let mpath = dir.path().join("metrics.dat");
        write_metrics_lines(&mpath, &[("auc_roc", 0.75), ("log_loss", 2.0f64.ln())]).unwrap();
        let text = std::fs::read_to_string(&mpath).unwrap();
        assert!(text.lines().count() == 2);
        assert!(text.starts_with("auc_roc 7.5"));

        let table = format_metrics_table(&[("auc_roc", 0.75)]);
        assert!(table.contains("auc_roc") && table.contains("0.750000"));

        let xy = dir.path().join("roc.dat");
        write_xy(&xy, &[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let text = std::fs::read_to_string(&xy).unwrap();
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            assert_eq!(line.split_whitespace().count(), 2);
        }
    }

    #[test]
    fn bad_prediction_files_fail_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::write(&path, "0 0 1 0.5\n0 1 2 0.5\n").unwrap();
        let err = load_predictions(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "got: {err}");
        std::fs::write(&path, "0 0 1 1.5\n").unwrap();
        assert!(load_predictions(&path).is_err());
        std::fs::write(&path, "0 0.5\n").unwrap();
        assert!(load_predictions(&path).is_err());
    }
}
