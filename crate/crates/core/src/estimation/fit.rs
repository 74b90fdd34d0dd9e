//! Alternating concentrated fit and its report.

use serde::{Deserialize, Serialize};

use crate::model::{AarchParams, ModelSpec, TarParams, ThresholdPartition, TimeSeries};

use super::information::information_on;
use super::steps::{alpha_step_residuals, design_qll, theta_step_design};
use super::{
    parameter_names, parameter_vector, AarchConstraint, Design, EstimationError, FitOptions,
};

/// Starting ARCH coefficient when no initial model is supplied. Zero would be
/// a stationary point of the variance objective for `alpha_i` and `beta_i`.
const INIT_ALPHA: f64 = 0.1;

/// Estimates with their uncertainty and convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimator: String,
    pub constraint: AarchConstraint,
    pub spec: ModelSpec,
    pub partition: ThresholdPartition,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec")]
    pub std_errors: Vec<f64>,
    /// Average outer product of scores, row-major.
    pub info_matrix: Vec<Vec<f64>>,
    /// Sandwich covariance of the estimates, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub qll: f64,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl FitReport {
    pub(crate) fn assemble(
        estimator: &str,
        constraint: AarchConstraint,
        spec: ModelSpec,
        qll: f64,
        n_obs: usize,
        iterations: usize,
        converged: bool,
        trace: Vec<f64>,
    ) -> Self {
        let names = parameter_names(spec.partition().regimes(), spec.p(), spec.q(), constraint);
        let params = parameter_vector(&spec, constraint);
        let k = params.len();
        Self {
            estimator: estimator.into(),
            constraint,
            partition: spec.partition().clone(),
            spec,
            param_names: names,
            params,
            std_errors: vec![f64::NAN; k],
            info_matrix: Vec::new(),
            covariance: Vec::new(),
            qll,
            n_obs,
            iterations,
            converged,
            trace,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Number of estimated parameters.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

fn initial_spec(
    design: &Design,
    partition: &ThresholdPartition,
    p: usize,
    q: usize,
    constraint: AarchConstraint,
) -> Result<ModelSpec, EstimationError> {
    let theta = super::ols_on(design)?;
    let e = design.residuals(&theta);
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-12);
    let alpha = if constraint == AarchConstraint::Homoskedastic { 0.0 } else { INIT_ALPHA };
    let aarch = AarchParams::new(
        var * (1.0 - q as f64 * alpha * alpha),
        vec![alpha; q],
        vec![0.0; q],
    )?;
    Ok(ModelSpec::new(
        partition.clone(),
        TarParams::from_flat(partition.regimes(), p, theta)?,
        aarch,
    )?)
}

/// Alternating fit with default options (all variance parameters free).
pub fn fit_alternating(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    p: usize,
    q: usize,
    init: Option<&ModelSpec>,
) -> Result<FitReport, EstimationError> {
    fit_alternating_with(series, partition, p, q, init, &FitOptions::default())
}

/// Alternate mean and variance steps until the objective and the parameters
/// settle.
///
/// Without `init`, the mean starts from per-regime OLS and the variance from
/// the OLS residual variance with `alpha_i = 0.1`, `beta_i = 0`. Each
/// iteration runs the mean step and then the variance step; `trace[0]` is the
/// objective at the start and `trace[k]` after iteration `k`. A final mean
/// step with the converged variance parameters leaves the mean estimating
/// equations satisfied at the reported estimate.
///
/// Only the variance step is an ascent step. The mean step solves the
/// weighted equations with `h_t` treated as fixed, and their root is not the
/// maximizer of `qll` in the mean coefficients, so the trace can dip slightly
/// as the alternation settles.
pub fn fit_alternating_with(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    p: usize,
    q: usize,
    init: Option<&ModelSpec>,
    options: &FitOptions,
) -> Result<FitReport, EstimationError> {
    let design = Design::new(series, partition, p, q, options.conditioning)?;
    let constraint = options.constraint;
    let start = match init {
        Some(spec) => {
            if spec.p() != p || spec.q() != q || spec.partition() != partition {
                return Err(crate::error::ModelError::Dimension(
                    "initial model does not match p, q and partition".into(),
                )
                .into());
            }
            spec.with_aarch(constraint.apply(spec.aarch()))?
        }
        None => initial_spec(&design, partition, p, q, constraint)?,
    };

    let mut theta = start.tar().as_flat().to_vec();
    let mut aarch = start.aarch().clone();
    let mut value = design_qll(&design, &theta, &aarch);
    if !value.is_finite() {
        return Err(EstimationError::NonFinite("objective at start".into()));
    }
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    let pack = |t: &[f64], a: &AarchParams| {
        let mut v = t.to_vec();
        v.extend(constraint.pack(a));
        v
    };
    while iterations < options.max_outer {
        iterations += 1;
        let before = pack(&theta, &aarch);
        theta = theta_step_design(&design, &aarch, &theta)?;
        let e = design.residuals(&theta);
        aarch = alpha_step_residuals(&e, &aarch, constraint)?;
        let next = design_qll(&design, &theta, &aarch);
        if !next.is_finite() {
            return Err(EstimationError::NonFinite(format!("objective at iteration {iterations}")));
        }
        let moved = pack(&theta, &aarch)
            .iter()
            .zip(&before)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rel = (next - value).abs() / value.abs().max(1.0);
        trace.push(next);
        value = next;
        if rel < options.rel_tol && moved < options.param_tol {
            converged = true;
            break;
        }
    }
    if converged {
        theta = theta_step_design(&design, &aarch, &theta)?;
        value = design_qll(&design, &theta, &aarch);
    }

    let spec = ModelSpec::new(
        partition.clone(),
        TarParams::from_flat(partition.regimes(), p, theta)?,
        aarch,
    )?;
    let mut report = FitReport::assemble(
        "concentrated",
        constraint,
        spec,
        value,
        design.len(),
        iterations,
        converged,
        trace,
    );
    if !converged {
        return Err(EstimationError::FitNotConverged {
            report: Box::new(report),
        });
    }
    if !options.skip_information {
        let info = information_on(&design, &report.spec, constraint)?;
        report.std_errors = info.std_errors;
        report.info_matrix = info.info;
        report.covariance = info.covariance;
    }
    Ok(report)
}
