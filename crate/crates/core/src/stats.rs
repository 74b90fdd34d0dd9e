//! Sample summaries used by the Monte Carlo harness.

use crate::rng::normal_cdf;

/// Critical value of the modified Anderson-Darling statistic for normality
/// with estimated mean and variance, 1% level.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Unbiased sample covariance of two equally long samples.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Moment skewness `m3 / m2^1.5`.
pub fn skewness(x: &[f64]) -> f64 {
    central_moment(x, 3) / central_moment(x, 2).powf(1.5)
}

/// Excess kurtosis `m4 / m2^2 - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    central_moment(x, 4) / central_moment(x, 2).powi(2) - 3.0
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Most frequent value; ties go to the smallest.
pub fn mode(values: &[usize]) -> Option<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    let mut best: Option<(usize, usize)> = None;
    for run in v.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, c)| run.len() > c) {
            best = Some((run[0], run.len()));
        }
    }
    best.map(|(value, _)| value)
}

/// Modified Anderson-Darling statistic `A^2 (1 + 0.75/n + 2.25/n^2)` for
/// normality with mean and variance estimated from the sample.
pub fn anderson_darling_normal(x: &[f64]) -> f64 {
    let n = x.len();
    let (m, s) = (mean(x), variance(x).sqrt());
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / s).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let lower = normal_cdf(z[i]).max(1e-300);
        let upper = (1.0 - normal_cdf(z[n - 1 - i])).max(1e-300);
        sum += (2 * i + 1) as f64 * (lower.ln() + upper.ln());
    }
    let a2 = -nf - sum / nf;
    a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn small_sample_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(skewness(&x), 0.0);
        assert!((excess_kurtosis(&x) - (2.5625 / 1.5625 - 3.0)).abs() < 1e-12);
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert_eq!(quantile_sorted(&x, 1.0 / 3.0), 2.0);
        assert_eq!(mode(&[3, 2, 2, 3, 1]), Some(2));
        assert_eq!(mode(&[]), None);
    }

    #[test]
    fn anderson_darling_separates_normal_from_exponential() {
        let rng = CounterRng::new(3);
        let normal: Vec<f64> = (0..500).map(|i| rng.standard_normal(i)).collect();
        let expo: Vec<f64> = (0..500).map(|i| -rng.uniform(i + 1000).ln()).collect();
        assert!(anderson_darling_normal(&normal) < AD_CRITICAL_1PCT);
        assert!(anderson_darling_normal(&expo) > 5.0 * AD_CRITICAL_1PCT);
    }

    #[test]
    fn evenly_spaced_normal_scores_give_small_statistic() {
        let n = 200;
        let x: Vec<f64> = (0..n)
            .map(|i| crate::rng::inverse_normal_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(anderson_darling_normal(&x) < 0.1);
    }
}
