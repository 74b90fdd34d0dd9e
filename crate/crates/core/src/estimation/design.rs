use crate::error::ModelError;
use crate::model::{variance_path, AarchParams, ThresholdPartition, TimeSeries};

use super::EstimationError;

/// Regression layout of a series under a fixed partition.
///
/// Row `s` corresponds to time `start + s`: target `x_t`, regressors
/// `(1, x_{t-1}, .., x_{t-p})` and the regime picked by `x_{t-d}`. Residuals
/// before `start` are treated as zero by the variance recursion.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub width: usize,
    pub regimes: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub regime: Vec<usize>,
    pub counts: Vec<usize>,
}

impl Design {
    pub fn new(
        series: &TimeSeries,
        partition: &ThresholdPartition,
        p: usize,
        q: usize,
        start: Option<usize>,
    ) -> Result<Self, EstimationError> {
        let minimum = p.max(q).max(partition.delay());
        let start = start.unwrap_or(minimum);
        if start < minimum {
            return Err(ModelError::InvalidParameter(format!(
                "conditioning on {start} observations, need at least {minimum}"
            ))
            .into());
        }
        let x = series.values();
        if x.len() <= start {
            return Err(ModelError::SeriesTooShort {
                len: x.len(),
                needed: start,
            }
            .into());
        }
        let width = p + 1;
        let rows = x.len() - start;
        let mut y = Vec::with_capacity(rows);
        let mut z = Vec::with_capacity(rows * width);
        let mut regime = Vec::with_capacity(rows);
        let mut counts = vec![0; partition.regimes()];
        for t in start..x.len() {
            y.push(x[t]);
            z.push(1.0);
            z.extend((1..=p).map(|k| x[t - k]));
            let j = partition.regime_index(x[t - partition.delay()]);
            counts[j] += 1;
            regime.push(j);
        }
        Ok(Self {
            width,
            regimes: partition.regimes(),
            y,
            z,
            regime,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.z[s * self.width..(s + 1) * self.width]
    }

    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|s| {
                let j = self.regime[s];
                let coef = &theta[j * self.width..(j + 1) * self.width];
                self.y[s] - dot(self.row(s), coef)
            })
            .collect()
    }

    pub fn variances(&self, aarch: &AarchParams, residuals: &[f64]) -> Vec<f64> {
        variance_path(aarch, residuals, 0.0)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-1/2 sum (ln h + e^2 / h)`.
pub(crate) fn qll_terms(residuals: &[f64], variances: &[f64]) -> f64 {
    -0.5 * residuals
        .iter()
        .zip(variances)
        .map(|(e, h)| h.ln() + e * e / h)
        .sum::<f64>()
}
