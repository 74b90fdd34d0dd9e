//! Profile search over delays and thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{ThresholdPartition, TimeSeries};
use crate::stats::quantile_sorted;

use super::{fit_alternating_with, AarchConstraint, EstimationError, FitOptions, FitReport};

/// Where threshold candidates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCandidates {
    /// Empirical quantiles of `x_{t-d}` at `lo, lo+step, .., hi`.
    Quantiles { lo: f64, hi: f64, step: f64 },
    /// The same explicit values for every delay.
    Explicit(Vec<f64>),
}

impl Default for ThresholdCandidates {
    fn default() -> Self {
        Self::Quantiles {
            lo: 0.10,
            hi: 0.90,
            step: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub delays: Vec<usize>,
    /// Regime counts to try; models of different size are ranked by
    /// `qll - (k/2) ln N`.
    #[serde(default = "default_regimes")]
    pub regime_counts: Vec<usize>,
    #[serde(default)]
    pub thresholds: ThresholdCandidates,
    #[serde(default = "default_fraction")]
    pub min_regime_fraction: f64,
    #[serde(default)]
    pub constraint: AarchConstraint,
}

fn default_regimes() -> Vec<usize> {
    vec![2]
}

fn default_fraction() -> f64 {
    0.05
}

impl SearchGrid {
    /// Two-regime search over `delays` with the default quantile grid.
    pub fn new(delays: Vec<usize>) -> Self {
        Self {
            delays,
            regime_counts: default_regimes(),
            thresholds: ThresholdCandidates::default(),
            min_regime_fraction: default_fraction(),
            constraint: AarchConstraint::Free,
        }
    }

    pub fn with_regime_counts(mut self, counts: Vec<usize>) -> Self {
        self.regime_counts = counts;
        self
    }

    pub fn with_thresholds(mut self, thresholds: ThresholdCandidates) -> Self {
        self.thresholds = thresholds;
        self
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.delays.is_empty() || self.regime_counts.is_empty() {
            return Err(ModelError::InvalidParameter("search grid is empty".into()));
        }
        if self.delays.contains(&0) || self.regime_counts.contains(&0) {
            return Err(ModelError::InvalidParameter(
                "delays and regime counts must be positive".into(),
            ));
        }
        if !(self.min_regime_fraction > 0.0 && self.min_regime_fraction < 0.5) {
            return Err(ModelError::InvalidParameter(
                "min_regime_fraction must lie in (0, 0.5)".into(),
            ));
        }
        match &self.thresholds {
            ThresholdCandidates::Quantiles { lo, hi, step } => {
                if !(0.0 < *lo && lo <= hi && *hi < 1.0 && *step > 0.0) {
                    return Err(ModelError::InvalidParameter(
                        "quantile grid needs 0 < lo <= hi < 1 and step > 0".into(),
                    ));
                }
            }
            ThresholdCandidates::Explicit(v) => {
                if v.iter().any(|t| !t.is_finite()) {
                    return Err(ModelError::InvalidParameter("non-finite threshold".into()));
                }
            }
        }
        Ok(())
    }
}

/// One row of the candidate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub delay: usize,
    pub thresholds: Vec<f64>,
    pub param_count: usize,
    pub qll: Option<f64>,
    /// `qll - (k/2) ln N`.
    pub criterion: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub partition: ThresholdPartition,
    pub fit: FitReport,
    pub conditioning: usize,
    pub candidates: Vec<CandidateScore>,
}

/// Threshold values for `l` regimes, every strictly increasing choice of
/// `l - 1` points from `pool`.
fn combinations(pool: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn walk(pool: &[f64], k: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..pool.len() {
            cur.push(pool[i]);
            walk(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    walk(pool, k, 0, &mut current, &mut out);
    out
}

fn candidate_partitions(
    x: &[f64],
    start: usize,
    grid: &SearchGrid,
) -> Result<Vec<ThresholdPartition>, ModelError> {
    let mut delays = grid.delays.clone();
    delays.sort_unstable();
    delays.dedup();
    let mut regimes = grid.regime_counts.clone();
    regimes.sort_unstable();
    regimes.dedup();
    let mut out = Vec::new();
    for &d in &delays {
        let mut lagged: Vec<f64> = (start..x.len()).map(|t| x[t - d]).collect();
        lagged.sort_by(f64::total_cmp);
        let mut pool: Vec<f64> = match &grid.thresholds {
            ThresholdCandidates::Quantiles { lo, hi, step } => {
                let count = ((hi - lo) / step + 1e-9).floor() as usize;
                (0..=count)
                    .map(|i| quantile_sorted(&lagged, lo + i as f64 * step))
                    .collect()
            }
            ThresholdCandidates::Explicit(v) => v.clone(),
        };
        pool.sort_by(f64::total_cmp);
        pool.dedup();
        let floor = (grid.min_regime_fraction * lagged.len() as f64).ceil() as usize;
        for &l in &regimes {
            if l == 1 {
                out.push(ThresholdPartition::single(d)?);
                continue;
            }
            for thresholds in combinations(&pool, l - 1) {
                let partition = ThresholdPartition::new(d, thresholds)?;
                let mut counts = vec![0usize; l];
                for &v in &lagged {
                    counts[partition.regime_index(v)] += 1;
                }
                if counts.iter().all(|&c| c >= floor.max(1)) {
                    out.push(partition);
                }
            }
        }
    }
    Ok(out)
}

/// Fit every candidate partition and keep the best by `qll - (k/2) ln N`.
///
/// All candidates condition on the same leading `max(p, q, max delay)`
/// observations so their objectives are comparable. Candidates are fitted
/// concurrently and reduced in grid order (delay, regime count, thresholds),
/// so ties go to the smaller delay and then the smaller first threshold.
/// Failed or non-converged candidates are kept in the table and skipped.
pub fn threshold_delay_search(
    series: &TimeSeries,
    p: usize,
    q: usize,
    grid: &SearchGrid,
) -> Result<SearchOutcome, EstimationError> {
    grid.validate()?;
    let x = series.values();
    let max_delay = *grid.delays.iter().max().expect("validated non-empty");
    let start = p.max(q).max(max_delay);
    if x.len() <= start + 1 {
        return Err(ModelError::SeriesTooShort {
            len: x.len(),
            needed: start + 2,
        }
        .into());
    }
    let partitions = candidate_partitions(x, start, grid)?;
    if partitions.is_empty() {
        return Err(EstimationError::AllCandidatesFailed(vec![
            "no threshold candidate satisfies the occupancy floor".into(),
        ]));
    }
    let n_used = (x.len() - start) as f64;
    let options = FitOptions {
        constraint: grid.constraint,
        conditioning: Some(start),
        skip_information: true,
        ..FitOptions::default()
    };
    let scores: Vec<CandidateScore> = partitions
        .par_iter()
        .map(|partition| {
            let k = partition.regimes() * (p + 1) + grid.constraint.free_count(q);
            let base = CandidateScore {
                delay: partition.delay(),
                thresholds: partition.thresholds().to_vec(),
                param_count: k,
                qll: None,
                criterion: None,
                error: None,
            };
            match fit_alternating_with(series, partition, p, q, None, &options) {
                Ok(fit) => CandidateScore {
                    qll: Some(fit.qll),
                    criterion: Some(fit.qll - 0.5 * k as f64 * n_used.ln()),
                    ..base
                },
                Err(e) => CandidateScore {
                    error: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(c) = s.criterion {
            if best.is_none_or(|b| c > scores[b].criterion.expect("scored")) {
                best = Some(i);
            }
        }
    }
    let Some(best) = best else {
        return Err(EstimationError::AllCandidatesFailed(
            scores
                .iter()
                .map(|s| {
                    format!(
                        "d={} thresholds={:?}: {}",
                        s.delay,
                        s.thresholds,
                        s.error.as_deref().unwrap_or("unknown")
                    )
                })
                .collect(),
        ));
    };
    let partition = partitions[best].clone();
    let fit = fit_alternating_with(
        series,
        &partition,
        p,
        q,
        None,
        &FitOptions {
            skip_information: false,
            ..options
        },
    )?;
    Ok(SearchOutcome {
        partition,
        fit,
        conditioning: start,
        candidates: scores,
    })
}
