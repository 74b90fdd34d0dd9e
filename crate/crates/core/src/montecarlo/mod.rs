//! Replication harness for the estimators.
//!
//! Replicate `r` at sample size `n` simulates from the true model with seed
//! `derive_seed(base_seed, n, r)`, so every cell is independent of thread
//! scheduling and of every other cell. Results are merged in `(n, r)` order.

mod diagnostics;
mod persist;
mod summary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::tar_arch_full_qmle_with;
use crate::error::ModelError;
use crate::estimation::{
    fit_alternating_with, parameter_names, parameter_vector, threshold_delay_search,
    AarchConstraint, EstimationError, FitOptions, FitReport, SearchGrid,
};
use crate::model::ModelSpec;
use crate::rng::derive_seed;
use crate::simulate::{simulate_path, SimConfig, DEFAULT_BURN_IN};

pub use diagnostics::{
    covariance_agreement, diagnose_standardized, efficiency_comparison, normality_diagnostics, CoordinateDiagnostics,
    CovarianceAgreement, EfficiencyRow, NormalityReport,
};
pub use persist::{load_result, read_rows_csv, write_rows_csv};
pub use summary::{rmse_ratios, summarize, SizeSummary};

/// Largest tolerated share of non-converged replicates at any sample size.
pub const MAX_NONCONVERGENCE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("stored summary disagrees with raw rows: {0}")]
    Incoherent(String),
    #[error("experiments are not comparable: {0}")]
    Mismatch(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Alternating concentrated fit, every variance parameter free.
    #[default]
    Concentrated,
    /// Alternating concentrated fit with `beta` pinned at zero.
    ConcentratedSymmetric,
    /// Joint QMLE of the symmetric model.
    FullSymmetric,
}

impl EstimatorKind {
    pub fn constraint(self) -> AarchConstraint {
        match self {
            Self::Concentrated => AarchConstraint::Free,
            Self::ConcentratedSymmetric | Self::FullSymmetric => AarchConstraint::Symmetric,
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub true_spec: ModelSpec,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorKind,
    /// When set, every replicate searches delay and thresholds instead of
    /// conditioning on the true partition.
    #[serde(default)]
    pub grid: Option<SearchGrid>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl ExperimentPlan {
    pub fn new(true_spec: ModelSpec, sample_sizes: Vec<usize>, replicates: usize, base_seed: u64) -> Self {
        Self {
            true_spec,
            sample_sizes,
            replicates,
            base_seed,
            estimator: EstimatorKind::Concentrated,
            grid: None,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_grid(mut self, grid: SearchGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, MonteCarloError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.replicates == 0 {
            return Err(MonteCarloError::Plan("replicates must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MonteCarloError::Plan(
                "sample sizes must be non-empty and strictly increasing".into(),
            ));
        }
        if self.estimator != EstimatorKind::Concentrated && !self.true_spec.aarch().is_symmetric() {
            return Err(MonteCarloError::Plan(
                "symmetric estimators need a true model with beta = 0".into(),
            ));
        }
        Ok(())
    }

    /// Stationarity warnings for the true model.
    pub fn warnings(&self) -> Vec<String> {
        self.true_spec.stationarity().warnings
    }

    pub fn param_names(&self) -> Vec<String> {
        let s = &self.true_spec;
        parameter_names(s.partition().regimes(), s.p(), s.q(), self.estimator.constraint())
    }

    /// True parameters in the layout of [`Self::param_names`], with the
    /// variance parameters in canonical form.
    pub fn truth(&self) -> Vec<f64> {
        let canonical = self
            .true_spec
            .with_aarch(self.true_spec.aarch().canonical())
            .expect("canonical form is valid");
        parameter_vector(&canonical, self.estimator.constraint())
    }
}

/// One simulated data set and its fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub qll: f64,
    pub delay: usize,
    pub thresholds: Vec<f64>,
    /// Estimates in the plan's parameter layout; NaN when unavailable.
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Upper triangle of `n` times the sandwich covariance, row by row.
    pub scaled_cov: Vec<f64>,
    pub error: Option<String>,
}

impl ReplicateRow {
    /// Converged with a full set of finite estimates and standard errors.
    pub fn usable(&self) -> bool {
        self.converged
            && self.params.iter().chain(&self.std_errors).all(|v| v.is_finite())
            && self.scaled_cov.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub param_names: Vec<String>,
    pub truth: Vec<f64>,
    pub summaries: Vec<SizeSummary>,
    /// Some sample size exceeded the non-convergence limit.
    pub failed: bool,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

impl ExperimentResult {
    /// Summaries as JSON; the raw rows go to CSV separately.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn summary_for(&self, n: usize) -> Option<&SizeSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }

    pub fn rows_for(&self, n: usize) -> impl Iterator<Item = &ReplicateRow> {
        self.rows.iter().filter(move |r| r.n == n)
    }
}

fn fit_once(plan: &ExperimentPlan, series: &crate::model::TimeSeries) -> Result<FitReport, EstimationError> {
    let spec = &plan.true_spec;
    let (p, q) = (spec.p(), spec.q());
    let constraint = plan.estimator.constraint();
    if let Some(grid) = &plan.grid {
        let grid = SearchGrid {
            constraint,
            ..grid.clone()
        };
        return threshold_delay_search(series, p, q, &grid).map(|o| o.fit);
    }
    let options = FitOptions::default().with_constraint(constraint);
    match plan.estimator {
        EstimatorKind::FullSymmetric => {
            tar_arch_full_qmle_with(series, spec.partition(), p, q, None, &options)
        }
        _ => fit_alternating_with(series, spec.partition(), p, q, None, &options),
    }
}

fn upper_triangle(cov: &[Vec<f64>], scale: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for r in 0..k {
        for c in r..k {
            out.push(cov.get(r).and_then(|row| row.get(c)).map_or(f64::NAN, |v| v * scale));
        }
    }
    out
}

fn run_cell(plan: &ExperimentPlan, k: usize, n: usize, r: usize) -> ReplicateRow {
    let seed = derive_seed(plan.base_seed, n as u64, r as u64);
    let mut row = ReplicateRow {
        n,
        r,
        seed,
        converged: false,
        iterations: 0,
        qll: f64::NAN,
        delay: plan.true_spec.partition().delay(),
        thresholds: plan.true_spec.partition().thresholds().to_vec(),
        params: vec![f64::NAN; k],
        std_errors: vec![f64::NAN; k],
        scaled_cov: vec![f64::NAN; k * (k + 1) / 2],
        error: None,
    };
    let config = SimConfig::new(n, seed).with_burn_in(plan.burn_in);
    let path = match simulate_path(&plan.true_spec, &config) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (report, error) = match fit_once(plan, &path.series) {
        Ok(rep) => (rep, None),
        Err(EstimationError::FitNotConverged { report }) => (*report, Some("not converged".into())),
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.converged = report.converged;
    row.iterations = report.iterations;
    row.qll = report.qll;
    row.delay = report.partition.delay();
    row.thresholds = report.partition.thresholds().to_vec();
    row.error = error;
    if report.params.len() == k {
        row.params = report.params;
        if report.std_errors.len() == k {
            row.std_errors = report.std_errors;
        }
        row.scaled_cov = upper_triangle(&report.covariance, n as f64, k);
    } else {
        row.error = Some(format!("selected model has {} parameters", report.params.len()));
    }
    row
}

/// Run every `(n, r)` cell on the global thread pool.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult, MonteCarloError> {
    plan.validate()?;
    let names = plan.param_names();
    let k = names.len();
    let cells: Vec<(usize, usize)> = plan
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..plan.replicates).map(move |r| (n, r)))
        .collect();
    let rows: Vec<ReplicateRow> = cells
        .par_iter()
        .map(|&(n, r)| run_cell(plan, k, n, r))
        .collect();
    assemble(plan.clone(), rows)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    plan: &ExperimentPlan,
    threads: usize,
) -> Result<ExperimentResult, MonteCarloError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
    pool.install(|| run_experiment(plan))
}

/// Build a result (summaries, failure flag) from raw rows.
pub fn assemble(plan: ExperimentPlan, rows: Vec<ReplicateRow>) -> Result<ExperimentResult, MonteCarloError> {
    let names = plan.param_names();
    let truth = plan.truth();
    let summaries = summarize(&plan, &truth, &rows);
    let failed = summaries.iter().any(|s| s.failed);
    Ok(ExperimentResult {
        warnings: plan.warnings(),
        plan,
        param_names: names,
        truth,
        summaries,
        failed,
        rows,
    })
}
