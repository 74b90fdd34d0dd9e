use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;
use crate::stats::{
    anderson_darling_normal, excess_kurtosis, quantile_sorted, skewness, variance, AD_CRITICAL_1PCT,
};

use super::{ExperimentResult, MonteCarloError, ReplicateRow};

/// Elementwise covariance tolerance, relative to `sqrt(c_ii c_jj)`.
const COV_TOLERANCE: f64 = 0.25;

/// Variance comparison of one coordinate between two estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub n: usize,
    pub name: String,
    pub pairs: usize,
    /// Empirical variance of `sqrt(n) (estimate - truth)`, first estimator.
    pub var_first: f64,
    pub var_second: f64,
    /// `var_first / var_second`.
    pub ratio: f64,
    pub var_first_se: f64,
    pub var_second_se: f64,
    /// Bootstrap 95% percentile interval of the ratio.
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

/// Compare two experiments run on the same simulated data sets.
///
/// Only replicates usable in both experiments enter. The uncertainty comes
/// from `bootstrap` paired resamples of the replicates drawn from the
/// counter-based stream keyed by `seed`.
pub fn efficiency_comparison(
    first: &ExperimentResult,
    second: &ExperimentResult,
    bootstrap: usize,
    seed: u64,
) -> Result<Vec<EfficiencyRow>, MonteCarloError> {
    let (a, b) = (&first.plan, &second.plan);
    if a.true_spec != b.true_spec {
        return Err(MonteCarloError::Mismatch("true models differ".into()));
    }
    if !a.true_spec.aarch().is_symmetric() {
        return Err(MonteCarloError::Mismatch("the true model must have beta = 0".into()));
    }
    if a.sample_sizes != b.sample_sizes || a.base_seed != b.base_seed || a.replicates != b.replicates {
        return Err(MonteCarloError::Mismatch(
            "plans must share sample sizes, replicates and seed".into(),
        ));
    }
    if first.param_names != second.param_names {
        return Err(MonteCarloError::Mismatch("parameter layouts differ".into()));
    }
    let rng = CounterRng::new(seed);
    let mut draws = 0u64;
    let mut out = Vec::new();
    for &n in &a.sample_sizes {
        let pairs: Vec<(&ReplicateRow, &ReplicateRow)> = first
            .rows_for(n)
            .zip(second.rows_for(n))
            .filter(|(x, y)| x.usable() && y.usable())
            .collect();
        let m = pairs.len();
        let root = (n as f64).sqrt();
        for (i, name) in first.param_names.iter().enumerate() {
            let xa: Vec<f64> = pairs.iter().map(|(x, _)| root * (x.params[i] - first.truth[i])).collect();
            let xb: Vec<f64> = pairs.iter().map(|(_, y)| root * (y.params[i] - second.truth[i])).collect();
            let (va, vb) = (variance(&xa), variance(&xb));
            let mut boot_a = Vec::with_capacity(bootstrap);
            let mut boot_b = Vec::with_capacity(bootstrap);
            let mut ratios = Vec::with_capacity(bootstrap);
            let mut ra = vec![0.0; m];
            let mut rb = vec![0.0; m];
            for _ in 0..bootstrap {
                for j in 0..m {
                    let pick = (rng.bits(draws) % m as u64) as usize;
                    draws += 1;
                    ra[j] = xa[pick];
                    rb[j] = xb[pick];
                }
                let (u, v) = (variance(&ra), variance(&rb));
                boot_a.push(u);
                boot_b.push(v);
                ratios.push(u / v);
            }
            ratios.sort_by(f64::total_cmp);
            let sd = |v: &[f64]| if v.len() > 1 { variance(v).sqrt() } else { f64::NAN };
            let (lo, hi) = if ratios.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (quantile_sorted(&ratios, 0.025), quantile_sorted(&ratios, 0.975))
            };
            out.push(EfficiencyRow {
                n,
                name: name.clone(),
                pairs: m,
                var_first: va,
                var_second: vb,
                ratio: va / vb,
                var_first_se: sd(&boot_a),
                var_second_se: sd(&boot_b),
                ratio_lo: lo,
                ratio_hi: hi,
            });
        }
    }
    Ok(out)
}

/// Shape checks of one coordinate's standardized estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateDiagnostics {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub anderson_darling: f64,
    /// Statistic below the 1% critical value.
    pub ad_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceAgreement {
    pub empirical: Vec<Vec<f64>>,
    pub estimated: Vec<Vec<f64>>,
    /// `|empirical - estimated| / sqrt(est_ii est_jj)` elementwise.
    pub relative_gap: Vec<Vec<f64>>,
    pub max_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    pub coordinates: Vec<CoordinateDiagnostics>,
    /// Share of coordinates passing the Anderson-Darling check.
    pub ad_pass_rate: f64,
    pub covariance: CovarianceAgreement,
}

/// Diagnostics of already standardized samples, one column per coordinate.
pub fn diagnose_standardized(names: &[String], columns: &[Vec<f64>]) -> Vec<CoordinateDiagnostics> {
    names
        .iter()
        .zip(columns)
        .map(|(name, z)| {
            let ad = anderson_darling_normal(z);
            CoordinateDiagnostics {
                name: name.clone(),
                count: z.len(),
                mean: z.iter().sum::<f64>() / z.len() as f64,
                sd: variance(z).sqrt(),
                skewness: skewness(z),
                excess_kurtosis: excess_kurtosis(z),
                anderson_darling: ad,
                ad_pass: ad < AD_CRITICAL_1PCT,
            }
        })
        .collect()
}

/// Compare an empirical covariance against an estimated one.
pub fn covariance_agreement(empirical: &[Vec<f64>], estimated: &[Vec<f64>]) -> CovarianceAgreement {
    let k = estimated.len();
    let gap: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            (0..k)
                .map(|c| {
                    (empirical[r][c] - estimated[r][c]).abs()
                        / (estimated[r][r] * estimated[c][c]).sqrt()
                })
                .collect()
        })
        .collect();
    let max_gap = gap.iter().flatten().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(*v) });
    CovarianceAgreement {
        empirical: empirical.to_vec(),
        estimated: estimated.to_vec(),
        relative_gap: gap,
        pass: max_gap <= COV_TOLERANCE,
        max_gap,
    }
}

/// Standardize the estimates at size `n` by their sandwich standard errors
/// and check their shape and covariance.
pub fn normality_diagnostics(result: &ExperimentResult, n: usize) -> Result<NormalityReport, MonteCarloError> {
    let summary = result
        .summary_for(n)
        .ok_or_else(|| MonteCarloError::Plan(format!("no sample size {n} in the experiment")))?;
    let used: Vec<&ReplicateRow> = result.rows_for(n).filter(|r| r.usable()).collect();
    if used.len() < 3 {
        return Err(MonteCarloError::Plan("too few usable replicates".into()));
    }
    let columns: Vec<Vec<f64>> = (0..result.param_names.len())
        .map(|i| {
            used.iter()
                .map(|r| (r.params[i] - result.truth[i]) / r.std_errors[i])
                .collect()
        })
        .collect();
    let coordinates = diagnose_standardized(&result.param_names, &columns);
    let ad_pass_rate =
        coordinates.iter().filter(|c| c.ad_pass).count() as f64 / coordinates.len() as f64;
    Ok(NormalityReport {
        n,
        coordinates,
        ad_pass_rate,
        covariance: covariance_agreement(&summary.empirical_cov, &summary.mean_sandwich_cov),
    })
}
