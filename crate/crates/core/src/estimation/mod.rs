//! Concentrated quasi-maximum-likelihood estimation.
//!
//! The objective is the Gaussian quasi-log-likelihood with the constant
//! dropped, summed over `t = m+1 ..= n` where `m = max(p, q, d)` (or a larger
//! conditioning count when several candidate models must share one sample):
//!
//! ```text
//! qll = -1/2 sum_t (ln h_t + e_t^2 / h_t)
//! ```
//!
//! `h_t` depends on the mean coefficients only through `|e_{t-i}|`, which is
//! not differentiable at zero, so the mean and variance blocks are estimated
//! by alternation:
//!
//! * the mean step solves the weighted least-squares equations
//!   `sum_t e_t / h_t * (1, x_{t-1}, .., x_{t-p}) 1(x_{t-d} in R_j) = 0` with
//!   `h_t` held fixed, refreshing `h_t` between passes until the coefficients
//!   stop moving;
//! * the variance step maximizes `qll` over `(alpha0, alpha, beta)` with the
//!   residuals held fixed, by damped Newton on `(ln alpha0, alpha, beta)`.
//!
//! Standard errors come from the sandwich `H^-1 J H^-T / n` built on the
//! estimating functions that the two steps actually solve.

mod design;
mod fit;
mod information;
mod search;
mod steps;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{AarchParams, ModelSpec, TarParams, TimeSeries};

pub(crate) use design::{qll_terms, Design};
pub use fit::{fit_alternating, fit_alternating_with, FitReport};
pub(crate) use information::{full_symmetric_score, sandwich, EstimatingKind};
pub use information::{estimate_information, Information};
pub use search::{
    threshold_delay_search, CandidateScore, SearchGrid, SearchOutcome, ThresholdCandidates,
};
pub use steps::{
    alpha_step, alpha_step_with, theta_equation_residuals, theta_step, variance_scores,
    EquationResiduals,
};

#[derive(Debug, Error, Clone)]
pub enum EstimationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("regime {regime} contains no observations")]
    EmptyRegime { regime: usize },
    #[error("regime {regime} design matrix is singular ({observations} observations)")]
    SingularRegime { regime: usize, observations: usize },
    #[error("mean step did not converge after {iterations} passes")]
    ThetaNotConverged { iterations: usize, best: TarParams },
    #[error("variance step did not converge after {iterations} iterations")]
    AlphaNotConverged { iterations: usize, best: AarchParams },
    #[error("fit did not converge after {} iterations", report.iterations)]
    FitNotConverged { report: Box<FitReport> },
    #[error("estimated Hessian is singular; parameters may be weakly identified")]
    WeakIdentification,
    #[error("non-finite objective: {0}")]
    NonFinite(String),
    #[error("every search candidate failed: {}", .0.join("; "))]
    AllCandidatesFailed(Vec<String>),
}

/// Restrictions on the variance parameters during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AarchConstraint {
    /// `alpha0`, every `alpha_i` and `beta_i` estimated.
    #[default]
    Free,
    /// `beta_i = 0`; the ARCH model written as `(alpha_i |e|)^2`.
    Symmetric,
    /// `alpha_i = beta_i = 0`; constant variance.
    Homoskedastic,
}

impl AarchConstraint {
    /// Number of estimated variance parameters for order `q`.
    pub fn free_count(self, q: usize) -> usize {
        match self {
            Self::Free => 1 + 2 * q,
            Self::Symmetric => 1 + q,
            Self::Homoskedastic => 1,
        }
    }

    pub(crate) fn pack(self, aarch: &AarchParams) -> Vec<f64> {
        let mut v = vec![aarch.alpha0()];
        if self != Self::Homoskedastic {
            v.extend_from_slice(aarch.alphas());
        }
        if self == Self::Free {
            v.extend_from_slice(aarch.betas());
        }
        v
    }

    pub(crate) fn unpack(self, q: usize, v: &[f64]) -> Result<AarchParams, ModelError> {
        let (alphas, betas) = match self {
            Self::Free => (v[1..=q].to_vec(), v[q + 1..=2 * q].to_vec()),
            Self::Symmetric => (v[1..=q].to_vec(), vec![0.0; q]),
            Self::Homoskedastic => (vec![0.0; q], vec![0.0; q]),
        };
        AarchParams::new(v[0], alphas, betas)
    }

    /// Force the pinned coefficients of `aarch` to zero.
    pub fn apply(self, aarch: &AarchParams) -> AarchParams {
        let q = aarch.order();
        self.unpack(q, &self.pack(aarch))
            .expect("packing preserves validity")
    }
}

/// Tuning of [`fit_alternating_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub constraint: AarchConstraint,
    /// Leading observations to condition on; defaults to `max(p, q, d)`.
    pub conditioning: Option<usize>,
    pub max_outer: usize,
    /// Relative change of `qll` between alternations.
    pub rel_tol: f64,
    /// Largest parameter move between alternations.
    pub param_tol: f64,
    /// Skip the sandwich computation (search candidates only need `qll`).
    pub skip_information: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            constraint: AarchConstraint::Free,
            conditioning: None,
            max_outer: 200,
            rel_tol: 1e-9,
            param_tol: 1e-9,
            skip_information: false,
        }
    }
}

impl FitOptions {
    pub fn with_constraint(mut self, constraint: AarchConstraint) -> Self {
        self.constraint = constraint;
        self
    }
}

/// Names of the estimated parameters in report order.
pub fn parameter_names(regimes: usize, p: usize, q: usize, constraint: AarchConstraint) -> Vec<String> {
    let mut names = Vec::new();
    for j in 1..=regimes {
        for k in 0..=p {
            names.push(format!("phi[{j}][{k}]"));
        }
    }
    names.push("alpha0".into());
    if constraint != AarchConstraint::Homoskedastic {
        names.extend((1..=q).map(|i| format!("alpha[{i}]")));
    }
    if constraint == AarchConstraint::Free {
        names.extend((1..=q).map(|i| format!("beta[{i}]")));
    }
    names
}

/// Parameter vector of `spec` in the layout of [`parameter_names`].
pub fn parameter_vector(spec: &ModelSpec, constraint: AarchConstraint) -> Vec<f64> {
    let mut v = spec.tar().as_flat().to_vec();
    v.extend(constraint.pack(spec.aarch()));
    v
}

/// Gaussian quasi-log-likelihood of `spec` on `series`, conditioning on the
/// first `max(p, q, d)` observations.
pub fn gaussian_qll(spec: &ModelSpec, series: &TimeSeries) -> Result<f64, EstimationError> {
    let design = Design::new(series, spec.partition(), spec.p(), spec.q(), None)?;
    let e = design.residuals(spec.tar().as_flat());
    let h = design.variances(spec.aarch(), &e);
    let value = qll_terms(&e, &h);
    if !value.is_finite() {
        return Err(EstimationError::NonFinite("quasi-log-likelihood".into()));
    }
    Ok(value)
}

/// Per-regime least squares (constant variance).
pub(crate) fn ols_on(design: &Design) -> Result<Vec<f64>, EstimationError> {
    let flat = AarchParams::homoskedastic(1.0, 1)?;
    steps::theta_step_design(design, &flat, &vec![0.0; design.regimes * design.width])
}

/// `qll` of given residual and variance paths.
pub fn qll_from_paths(residuals: &[f64], variances: &[f64]) -> f64 {
    qll_terms(residuals, variances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThresholdPartition;
    use crate::simulate::{simulate_path, SimConfig};

    pub(crate) fn reference() -> ModelSpec {
        ModelSpec::new(
            ThresholdPartition::new(1, vec![0.0]).unwrap(),
            TarParams::new(vec![vec![0.2, 0.5], vec![-0.3, -0.4]]).unwrap(),
            AarchParams::new(0.1, vec![0.4], vec![0.2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_term_values() {
        assert_eq!(qll_from_paths(&[0.0], &[1.0]), 0.0);
        assert_eq!(qll_from_paths(&[1.0], &[1.0]), -0.5);
    }

    #[test]
    fn constant_variance_maximized_at_mean_square() {
        let e = [0.3, -1.1, 0.7, 2.0, -0.4];
        let ms = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        let at = |h: f64| qll_from_paths(&e, &vec![h; e.len()]);
        let best = at(ms);
        for f in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            assert!(at(ms * f) < best);
        }
    }

    #[test]
    fn constraint_packing() {
        let a = AarchParams::new(0.1, vec![0.4, 0.1], vec![0.2, -0.1]).unwrap();
        assert_eq!(AarchConstraint::Free.pack(&a), vec![0.1, 0.4, 0.1, 0.2, -0.1]);
        assert_eq!(AarchConstraint::Symmetric.pack(&a), vec![0.1, 0.4, 0.1]);
        assert_eq!(AarchConstraint::Homoskedastic.pack(&a), vec![0.1]);
        assert_eq!(AarchConstraint::Free.unpack(2, &[0.1, 0.4, 0.1, 0.2, -0.1]).unwrap(), a);
        assert!(AarchConstraint::Symmetric.apply(&a).is_symmetric());
        assert_eq!(
            parameter_names(2, 1, 1, AarchConstraint::Free),
            ["phi[1][0]", "phi[1][1]", "phi[2][0]", "phi[2][1]", "alpha0", "alpha[1]", "beta[1]"]
        );
    }

    #[test]
    fn shifting_the_level_leaves_the_likelihood_unchanged() {
        let spec = reference();
        let path = simulate_path(&spec, &SimConfig::new(1500, 4)).unwrap();
        let c = 3.75;
        let shifted = TimeSeries::new(path.series.values().iter().map(|v| v + c).collect()).unwrap();
        let rows: Vec<Vec<f64>> = spec
            .tar()
            .rows()
            .into_iter()
            .map(|mut r| {
                let ar: f64 = r[1..].iter().sum();
                r[0] += c * (1.0 - ar);
                r
            })
            .collect();
        let moved = ModelSpec::new(
            spec.partition().shifted(c),
            TarParams::new(rows).unwrap(),
            spec.aarch().clone(),
        )
        .unwrap();
        let d0 = Design::new(&path.series, spec.partition(), 1, 1, None).unwrap();
        let d1 = Design::new(&shifted, moved.partition(), 1, 1, None).unwrap();
        let e0 = d0.residuals(spec.tar().as_flat());
        let e1 = d1.residuals(moved.tar().as_flat());
        let h0 = d0.variances(spec.aarch(), &e0);
        let h1 = d1.variances(moved.aarch(), &e1);
        for s in 0..e0.len() {
            assert!((e0[s] - e1[s]).abs() < 1e-10);
            assert!((h0[s] - h1[s]).abs() < 1e-10);
        }
        let q0 = gaussian_qll(&spec, &path.series).unwrap();
        let q1 = gaussian_qll(&moved, &shifted).unwrap();
        assert!((q0 - q1).abs() < 1e-10 * q0.abs().max(1.0));
    }
}
