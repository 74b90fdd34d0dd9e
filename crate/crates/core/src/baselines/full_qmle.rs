//! Joint QMLE of the symmetric threshold ARCH model.
//!
//! With `beta = 0` the variance is `h_t = alpha0 + sum_i a_i e_{t-i}^2`
//! (`a_i = alpha_i^2`), which is smooth in the mean coefficients, so the
//! full score, including the path of `h` through past residuals, can be
//! maximized directly.

use crate::estimation::{
    full_symmetric_score, ols_on, parameter_names, sandwich, AarchConstraint, Design,
    EstimatingKind, EstimationError, FitOptions, FitReport,
};
use crate::model::{AarchParams, ModelSpec, TarParams, ThresholdPartition, TimeSeries};
use crate::optim::{bfgs_maximize, OptimOptions};

const INIT_A: f64 = 0.01;
const MIN_A: f64 = 1e-10;

fn objective(design: &Design, q: usize, theta: &[f64], alpha0: f64, a: &[f64]) -> Option<f64> {
    let e = design.residuals(theta);
    let mut sum = 0.0;
    for s in 0..e.len() {
        let mut h = alpha0;
        for i in 0..q.min(s) {
            h += a[i] * e[s - i - 1] * e[s - i - 1];
        }
        sum += h.ln() + e[s] * e[s] / h;
    }
    let v = -0.5 * sum;
    v.is_finite().then_some(v)
}

/// `(theta, alpha0, a)` from optimizer coordinates `(theta, ln alpha0, ln a)`.
fn natural(u: &[f64], n_theta: usize) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, v)| if i < n_theta { *v } else { v.exp() })
        .collect()
}

fn start_point(
    design: &Design,
    q: usize,
    init: Option<&ModelSpec>,
) -> Result<Vec<f64>, EstimationError> {
    let (mut u, alpha0, a) = match init {
        Some(spec) => (
            spec.tar().as_flat().to_vec(),
            spec.aarch().alpha0(),
            spec.aarch().alphas().iter().map(|v| (v * v).max(MIN_A)).collect(),
        ),
        None => {
            let theta = ols_on(design)?;
            let e = design.residuals(&theta);
            let n = e.len() as f64;
            let m = e.iter().sum::<f64>() / n;
            let var = (e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).max(1e-12);
            (theta, var * (1.0 - INIT_A * q as f64), vec![INIT_A; q])
        }
    };
    u.push(alpha0.ln());
    u.extend(a.iter().map(|v: &f64| v.ln()));
    Ok(u)
}

/// Full QMLE with default options.
pub fn tar_arch_full_qmle(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    p: usize,
    q: usize,
) -> Result<FitReport, EstimationError> {
    tar_arch_full_qmle_with(series, partition, p, q, None, &FitOptions::default())
}

/// Jointly maximize the `qll` of the symmetric model by BFGS on
/// `(theta, ln alpha0, ln a_i)`.
///
/// The report is written in the scale of the concentrated estimator with the
/// symmetric constraint, `(theta, alpha0, alpha_i = sqrt(a_i))`; covariances
/// of `alpha_i` come from the delta method. Only `conditioning` and
/// `skip_information` are read from `options`.
pub fn tar_arch_full_qmle_with(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    p: usize,
    q: usize,
    init: Option<&ModelSpec>,
    options: &FitOptions,
) -> Result<FitReport, EstimationError> {
    let design = Design::new(series, partition, p, q, options.conditioning)?;
    let n_theta = partition.regimes() * (p + 1);
    let nf = design.len() as f64;
    let u0 = start_point(&design, q, init)?;

    let f = |u: &[f64]| {
        let psi = natural(u, n_theta);
        let value = objective(&design, q, &psi[..n_theta], psi[n_theta], &psi[n_theta + 1..])?;
        let mut g = full_symmetric_score(&design, q, &psi)?;
        for i in n_theta..g.len() {
            g[i] *= psi[i];
        }
        g.iter_mut().for_each(|v| *v /= nf);
        Some((value / nf, g))
    };
    let out = bfgs_maximize(f, &u0, &OptimOptions::default())
        .ok_or_else(|| EstimationError::NonFinite("full QMLE objective at start".into()))?;

    let psi = natural(&out.x, n_theta);
    let alphas: Vec<f64> = psi[n_theta + 1..].iter().map(|a| a.sqrt()).collect();
    let spec = ModelSpec::new(
        partition.clone(),
        TarParams::from_flat(partition.regimes(), p, psi[..n_theta].to_vec())?,
        AarchParams::new(psi[n_theta], alphas.clone(), vec![0.0; q])?,
    )?;
    let trace = out.trace.iter().map(|v| v * nf).collect();
    let mut report = FitReport::assemble(
        "full_symmetric",
        AarchConstraint::Symmetric,
        spec,
        out.value * nf,
        design.len(),
        out.iterations,
        out.converged,
        trace,
    );
    if !out.converged {
        return Err(EstimationError::FitNotConverged {
            report: Box::new(report),
        });
    }
    if !options.skip_information {
        let mut names = parameter_names(partition.regimes(), p, q, AarchConstraint::Homoskedastic);
        names.extend((1..=q).map(|i| format!("a[{i}]")));
        let info = sandwich(&design, q, EstimatingKind::FullSymmetric, &psi, names)?;
        // d alpha / d a = 1 / (2 alpha)
        let k = psi.len();
        let scale: Vec<f64> = (0..k)
            .map(|i| {
                if i <= n_theta {
                    1.0
                } else {
                    0.5 / alphas[i - n_theta - 1]
                }
            })
            .collect();
        report.covariance = (0..k)
            .map(|r| (0..k).map(|c| info.covariance[r][c] * scale[r] * scale[c]).collect())
            .collect();
        report.info_matrix = (0..k)
            .map(|r| (0..k).map(|c| info.info[r][c] / (scale[r] * scale[c])).collect())
            .collect();
        report.std_errors = (0..k).map(|i| report.covariance[i][i].max(0.0).sqrt()).collect();
    }
    Ok(report)
}
