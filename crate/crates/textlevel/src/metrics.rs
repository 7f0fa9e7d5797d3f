//! Evaluation framework: mean squared error, Pearson correlation, quadratic
//! weighted kappa, percentile-bootstrap confidence intervals, and the naive
//! baselines models are compared against.
//!
//! Everything here is a pure function of its inputs; bootstrap resamples
//! draw their RNG streams from `(seed, resample index)`, so results do not
//! depend on evaluation order.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::level_from_score;
use crate::seeding;
use crate::{Error, Result};

/// Mean squared error between predictions and labels. On the 1-6 scale the
/// worst possible value is 25.
pub fn mse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Sample Pearson correlation. Undefined for constant vectors.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Quadratic weighted kappa between two rating vectors on the 1-6 scale.
///
/// Values are binned to the nearest of the nine admissible rating points
/// (midpoints round up) and indexed 0..=8; disagreement between classes i
/// and j costs (i-j)²/8². Kappa is 1 minus the ratio of observed to
/// chance-expected weighted disagreement.
pub fn qwk(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = a.len() as f64;
    let classes = 9usize;
    let mut observed = vec![vec![0.0; classes]; classes];
    let mut marginal_a = vec![0.0; classes];
    let mut marginal_b = vec![0.0; classes];
    for (&x, &y) in a.iter().zip(b) {
        let i = level_from_score(x)?.index();
        let j = level_from_score(y)?.index();
        observed[i][j] += 1.0 / n;
        marginal_a[i] += 1.0 / n;
        marginal_b[j] += 1.0 / n;
    }
    let weight = |i: usize, j: usize| {
        let d = i as f64 - j as f64;
        d * d / 64.0
    };
    let mut obs_disagreement = 0.0;
    let mut exp_disagreement = 0.0;
    for i in 0..classes {
        for j in 0..classes {
            obs_disagreement += observed[i][j] * weight(i, j);
            exp_disagreement += marginal_a[i] * marginal_b[j] * weight(i, j);
        }
    }
    if exp_disagreement == 0.0 {
        return Err(Error::UndefinedKappa);
    }
    Ok(1.0 - obs_disagreement / exp_disagreement)
}

/// Percentile-bootstrap confidence interval for the MSE of paired
/// (prediction, label) data.
///
/// Draws `resamples` seeded resamples of size n with replacement, computes
/// the MSE of each, and returns the matching percentile bounds (5th and
/// 95th for `level` 0.90). Deterministic under a fixed seed. Callers should
/// use at least 1000 resamples; the CLI default is 10000.
pub fn bootstrap_ci(
    predictions: &[f64],
    labels: &[f64],
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() || resamples == 0 {
        return Err(Error::EmptyInput);
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::ScoreOutOfRange(level));
    }
    let squared_errors: Vec<f64> = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .collect();
    let n = squared_errors.len();
    let mut stats = Vec::with_capacity(resamples);
    for rep in 0..resamples {
        let mut rng = seeding::derived_rng(seed, "bootstrap", rep as u64);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += squared_errors[rng.random_range(0..n)];
        }
        stats.push(sum / n as f64);
    }
    stats.sort_by(|x, y| x.partial_cmp(y).expect("finite mse"));
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&stats, tail), percentile(&stats, 1.0 - tail)))
}

/// Linear-interpolated quantile of an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// A trivial prediction strategy to score against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Predictions drawn uniformly from [1, 6].
    RandomUniform { seed: u64 },
    /// A fixed prediction, conventionally the train-split median.
    Constant(f64),
}

/// MSE a baseline strategy achieves on the given labels.
pub fn baseline_mse(labels: &[f64], baseline: Baseline) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    match baseline {
        Baseline::Constant(c) => {
            let preds = vec![c; labels.len()];
            mse(&preds, labels)
        }
        Baseline::RandomUniform { seed } => {
            let mut rng = seeding::derived_rng(seed, "baseline-random", 0);
            let preds: Vec<f64> = labels
                .iter()
                .map(|_| rng.random_range(1.0..=6.0))
                .collect();
            mse(&preds, labels)
        }
    }
}

/// Median of a non-empty slice (midpoint average for even counts).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        Ok((sorted[mid - 1] + sorted[mid]) / 2.0)
    } else {
        Ok(sorted[mid])
    }
}

/// Baseline MSEs included in every evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub random_mse: f64,
    pub constant_median_mse: f64,
}

/// One model evaluation: MSE with a 90% bootstrap interval, agreement and
/// correlation diagnostics, and the baseline comparisons. Serializes to a
/// single canonical JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub ci90: (f64, f64),
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qwk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_by_feature: Option<BTreeMap<String, f64>>,
    pub baselines: Baselines,
}

impl EvalReport {
    /// Evaluate predictions against labels. `train_median` feeds the
    /// constant baseline; `resamples` and `seed` drive the bootstrap and the
    /// random baseline. QWK is omitted when undefined for the data.
    pub fn compute(
        predictions: &[f64],
        labels: &[f64],
        train_median: f64,
        resamples: usize,
        seed: u64,
    ) -> Result<EvalReport> {
        let mse = mse(predictions, labels)?;
        let ci90 = bootstrap_ci(predictions, labels, resamples, seed, 0.90)?;
        let qwk = qwk(predictions, labels).ok();
        let baselines = Baselines {
            random_mse: baseline_mse(labels, Baseline::RandomUniform { seed })?,
            constant_median_mse: baseline_mse(labels, Baseline::Constant(train_median))?,
        };
        Ok(EvalReport {
            mse,
            ci90,
            n: labels.len(),
            qwk,
            pearson_by_feature: None,
            baselines,
        })
    }

    /// The canonical single-line form.
    pub fn to_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::MalformedRecord {
            line: 0,
            message: e.to_string(),
        })
    }

    /// Parse a report back from its canonical line.
    pub fn from_line(line: &str) -> Result<EvalReport> {
        serde_json::from_str(line.trim()).map_err(|e| Error::MalformedRecord {
            line: 1,
            message: e.to_string(),
        })
    }
}
