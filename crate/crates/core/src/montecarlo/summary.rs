use serde::{Deserialize, Serialize};

use crate::stats::{covariance, median, mode};

use super::{ExperimentPlan, ExperimentResult, ReplicateRow, MAX_NONCONVERGENCE};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Per-sample-size summary over usable replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replicates: usize,
    pub usable: usize,
    pub nonconvergence_rate: f64,
    pub failed: bool,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub bias: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub rmse: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub mean_se: Vec<f64>,
    /// Share of 95% sandwich intervals containing the truth.
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub coverage: Vec<f64>,
    /// Sample covariance of `sqrt(n) (estimate - truth)`.
    #[serde(deserialize_with = "crate::serde_nan::matrix")]
    pub empirical_cov: Vec<Vec<f64>>,
    /// Mean of `n` times the sandwich covariance.
    #[serde(deserialize_with = "crate::serde_nan::matrix")]
    pub mean_sandwich_cov: Vec<Vec<f64>>,
    pub delay_mode: Option<usize>,
    /// Per-boundary median of the selected thresholds.
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub median_thresholds: Vec<f64>,
    /// Median over replicates of the largest absolute threshold error.
    pub median_abs_threshold_error: Option<f64>,
}

fn unpack_upper(v: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; k]; k];
    let mut i = 0;
    for r in 0..k {
        for c in r..k {
            m[r][c] = v[i];
            m[c][r] = v[i];
            i += 1;
        }
    }
    m
}

fn summarize_size(plan: &ExperimentPlan, truth: &[f64], n: usize, rows: &[&ReplicateRow]) -> SizeSummary {
    let k = truth.len();
    let used: Vec<&ReplicateRow> = rows.iter().copied().filter(|r| r.usable()).collect();
    let m = used.len();
    let mf = m as f64;
    let rate = if rows.is_empty() {
        0.0
    } else {
        (rows.len() - m) as f64 / rows.len() as f64
    };
    let nan = || vec![f64::NAN; k];
    let (mut bias, mut rmse, mut mean_se, mut coverage) = (nan(), nan(), nan(), nan());
    let mut empirical_cov = vec![vec![f64::NAN; k]; k];
    let mut mean_sandwich_cov = vec![vec![f64::NAN; k]; k];
    if m > 0 {
        for i in 0..k {
            let err: Vec<f64> = used.iter().map(|r| r.params[i] - truth[i]).collect();
            bias[i] = err.iter().sum::<f64>() / mf;
            rmse[i] = (err.iter().map(|e| e * e).sum::<f64>() / mf).sqrt();
            mean_se[i] = used.iter().map(|r| r.std_errors[i]).sum::<f64>() / mf;
            coverage[i] = used
                .iter()
                .filter(|r| (r.params[i] - truth[i]).abs() <= Z95 * r.std_errors[i])
                .count() as f64
                / mf;
        }
        let mut acc = vec![vec![0.0; k]; k];
        for r in &used {
            let s = unpack_upper(&r.scaled_cov, k);
            for a in 0..k {
                for b in 0..k {
                    acc[a][b] += s[a][b];
                }
            }
        }
        mean_sandwich_cov = acc.into_iter().map(|row| row.into_iter().map(|v| v / mf).collect()).collect();
        if m > 1 {
            let root = (n as f64).sqrt();
            let scaled: Vec<Vec<f64>> = (0..k)
                .map(|i| used.iter().map(|r| root * (r.params[i] - truth[i])).collect())
                .collect();
            for a in 0..k {
                for b in 0..k {
                    empirical_cov[a][b] = covariance(&scaled[a], &scaled[b]);
                }
            }
        }
    }

    let true_thresholds = plan.true_spec.partition().thresholds();
    let fitted: Vec<&ReplicateRow> = rows.iter().copied().filter(|r| r.converged).collect();
    let delay_mode = mode(&fitted.iter().map(|r| r.delay).collect::<Vec<_>>());
    let matching: Vec<&ReplicateRow> = fitted
        .iter()
        .copied()
        .filter(|r| r.thresholds.len() == true_thresholds.len())
        .collect();
    let (median_thresholds, median_abs_threshold_error) =
        if matching.is_empty() || true_thresholds.is_empty() {
            (Vec::new(), None)
        } else {
            let med = (0..true_thresholds.len())
                .map(|j| median(&matching.iter().map(|r| r.thresholds[j]).collect::<Vec<_>>()))
                .collect();
            let errs: Vec<f64> = matching
                .iter()
                .map(|r| {
                    r.thresholds
                        .iter()
                        .zip(true_thresholds)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .collect();
            (med, Some(median(&errs)))
        };

    SizeSummary {
        n,
        replicates: rows.len(),
        usable: m,
        nonconvergence_rate: rate,
        failed: rate > MAX_NONCONVERGENCE,
        bias,
        rmse,
        mean_se,
        coverage,
        empirical_cov,
        mean_sandwich_cov,
        delay_mode,
        median_thresholds,
        median_abs_threshold_error,
    }
}

/// Summaries per sample size, in plan order.
pub fn summarize(plan: &ExperimentPlan, truth: &[f64], rows: &[ReplicateRow]) -> Vec<SizeSummary> {
    plan.sample_sizes
        .iter()
        .map(|&n| {
            let cell: Vec<&ReplicateRow> = rows.iter().filter(|r| r.n == n).collect();
            summarize_size(plan, truth, n, &cell)
        })
        .collect()
}

/// `RMSE(n_i) / RMSE(n_{i+1})` per parameter for consecutive sample sizes.
pub fn rmse_ratios(result: &ExperimentResult) -> Vec<(usize, usize, Vec<f64>)> {
    result
        .summaries
        .windows(2)
        .map(|w| {
            let ratios = w[0].rmse.iter().zip(&w[1].rmse).map(|(a, b)| a / b).collect();
            (w[0].n, w[1].n, ratios)
        })
        .collect()
}
