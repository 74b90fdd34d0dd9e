//! Score outer products, numerical Hessians and sandwich covariances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{ModelSpec, TimeSeries};

use super::{parameter_names, parameter_vector, AarchConstraint, Design, EstimationError};

/// Observations whose residual is closer to zero than this are left out of
/// the score sums; `|e|` has no derivative there.
const KINK_EPS: f64 = 1e-8;

/// Which estimating functions the estimator solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EstimatingKind {
    /// Mean block `e z / h` with `h` held fixed, variance block the `qll` score.
    Concentrated(AarchConstraint),
    /// Full `qll` score of the symmetric model `h = alpha0 + sum a_i e^2`,
    /// parameters `(theta, alpha0, a_1..a_q)`.
    FullSymmetric,
}

/// Sandwich ingredients for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Information {
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// Average outer product of the per-observation scores.
    pub info: Vec<Vec<f64>>,
    /// Numerical Jacobian of the average score.
    pub hessian: Vec<Vec<f64>>,
    /// `H^-1 J H^-T / n`.
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub n_used: usize,
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Sum of per-observation scores over `mask`, plus their outer product when asked.
fn score_sums(
    design: &Design,
    q: usize,
    kind: EstimatingKind,
    psi: &[f64],
    mask: Option<&[bool]>,
    outer: bool,
) -> Option<(Vec<f64>, Option<DMatrix<f64>>, Vec<f64>)> {
    let n_theta = design.regimes * design.width;
    let k = psi.len();
    let theta = &psi[..n_theta];
    let var = &psi[n_theta..];
    let e = design.residuals(theta);
    let w = design.width;

    let mut sum = vec![0.0; k];
    let mut jj = outer.then(|| DMatrix::<f64>::zeros(k, k));
    let mut g = vec![0.0; k];
    let mut dh = vec![0.0; var.len()];
    for s in 0..design.len() {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut h = var[0];
        match kind {
            EstimatingKind::Concentrated(constraint) => {
                let (alphas, betas): (&[f64], &[f64]) = match constraint {
                    AarchConstraint::Free => (&var[1..=q], &var[q + 1..]),
                    AarchConstraint::Symmetric => (&var[1..=q], &[]),
                    AarchConstraint::Homoskedastic => (&[], &[]),
                };
                let n_var = var.len();
                dh.iter_mut().for_each(|v| *v = 0.0);
                dh[0] = 1.0;
                for i in 0..q.min(s) {
                    let lag = e[s - i - 1];
                    let a = alphas.get(i).copied().unwrap_or(0.0);
                    let b = betas.get(i).copied().unwrap_or(0.0);
                    let u = a * lag.abs() + b * lag;
                    h += u * u;
                    if !alphas.is_empty() {
                        dh[1 + i] = 2.0 * u * lag.abs();
                    }
                    if !betas.is_empty() {
                        dh[1 + q + i] = 2.0 * u * lag;
                    }
                }
                if !(h > 0.0) {
                    return None;
                }
                let j = design.regime[s];
                let row = design.row(s);
                for c in 0..w {
                    g[j * w + c] = e[s] * row[c] / h;
                }
                let a = 0.5 * (e[s] * e[s] - h) / (h * h);
                for r in 0..n_var {
                    g[n_theta + r] = a * dh[r];
                }
            }
            EstimatingKind::FullSymmetric => {
                let arch = &var[1..];
                for i in 0..q.min(s) {
                    h += arch[i] * e[s - i - 1] * e[s - i - 1];
                }
                if !(h > 0.0) {
                    return None;
                }
                let a = 0.5 * (e[s] * e[s] - h) / (h * h);
                let j = design.regime[s];
                let row = design.row(s);
                for c in 0..w {
                    g[j * w + c] += e[s] * row[c] / h;
                }
                // dh/dtheta through e_{t-i} = y - z'theta
                for i in 0..q.min(s) {
                    let lag = s - i - 1;
                    let jl = design.regime[lag];
                    let scale = a * arch[i] * 2.0 * e[lag];
                    for (c, zc) in design.row(lag).iter().enumerate() {
                        g[jl * w + c] -= scale * zc;
                    }
                }
                g[n_theta] = a;
                for i in 0..q.min(s) {
                    g[n_theta + 1 + i] = a * e[s - i - 1] * e[s - i - 1];
                }
            }
        }
        if mask.is_none_or(|m| m[s]) {
            for r in 0..k {
                sum[r] += g[r];
            }
            if let Some(jj) = jj.as_mut() {
                for r in 0..k {
                    for c in 0..=r {
                        jj[(r, c)] += g[r] * g[c];
                    }
                }
            }
        }
    }
    if let Some(jj) = jj.as_mut() {
        for r in 0..k {
            for c in r + 1..k {
                jj[(r, c)] = jj[(c, r)];
            }
        }
    }
    Some((sum, jj, e))
}

/// Sandwich covariance for the estimator defined by `kind` at `psi`.
pub(crate) fn sandwich(
    design: &Design,
    q: usize,
    kind: EstimatingKind,
    psi: &[f64],
    names: Vec<String>,
) -> Result<Information, EstimationError> {
    let k = psi.len();
    let e = design.residuals(&psi[..design.regimes * design.width]);
    let mask: Vec<bool> = e.iter().map(|v| v.abs() >= KINK_EPS).collect();
    let n_used = mask.iter().filter(|&&m| m).count();
    if n_used <= k {
        return Err(EstimationError::WeakIdentification);
    }
    let nf = n_used as f64;
    let (_, jj, _) = score_sums(design, q, kind, psi, Some(&mask), true)
        .ok_or_else(|| EstimationError::NonFinite("scores at estimate".into()))?;
    let info = jj.expect("outer product requested") / nf;

    let mut hess = DMatrix::<f64>::zeros(k, k);
    for c in 0..k {
        let step = 1e-5 * (1.0 + psi[c].abs());
        let mut up = psi.to_vec();
        let mut dn = psi.to_vec();
        up[c] += step;
        dn[c] -= step;
        let (gu, _, _) = score_sums(design, q, kind, &up, Some(&mask), false)
            .ok_or(EstimationError::WeakIdentification)?;
        let (gd, _, _) = score_sums(design, q, kind, &dn, Some(&mask), false)
            .ok_or(EstimationError::WeakIdentification)?;
        for r in 0..k {
            hess[(r, c)] = (gu[r] - gd[r]) / (2.0 * step * nf);
        }
    }
    let inv = hess
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(EstimationError::WeakIdentification)?;
    let cov = &inv * &info * inv.transpose() / nf;
    let cov = (&cov + cov.transpose()) * 0.5;
    let std_errors = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(Information {
        param_names: names,
        params: psi.to_vec(),
        info: to_rows(&info),
        hessian: to_rows(&hess),
        covariance: to_rows(&cov),
        std_errors,
        n_used,
    })
}

/// Information estimates for the concentrated estimator at `spec`.
///
/// `constraint` selects which variance parameters were estimated; pinned
/// coefficients are left out of every matrix.
pub fn estimate_information(
    series: &TimeSeries,
    spec: &ModelSpec,
    constraint: AarchConstraint,
) -> Result<Information, EstimationError> {
    let design = Design::new(series, spec.partition(), spec.p(), spec.q(), None)?;
    information_on(&design, spec, constraint)
}

pub(crate) fn information_on(
    design: &Design,
    spec: &ModelSpec,
    constraint: AarchConstraint,
) -> Result<Information, EstimationError> {
    let psi = parameter_vector(spec, constraint);
    let names = parameter_names(spec.partition().regimes(), spec.p(), spec.q(), constraint);
    sandwich(design, spec.q(), EstimatingKind::Concentrated(constraint), &psi, names)
}

/// Summed `qll` score of the symmetric model at `(theta, alpha0, a_1..a_q)`.
pub(crate) fn full_symmetric_score(design: &Design, q: usize, psi: &[f64]) -> Option<Vec<f64>> {
    score_sums(design, q, EstimatingKind::FullSymmetric, psi, None, false).map(|(sum, _, _)| sum)
}

/// Average score of the concentrated estimating functions (test support).
#[cfg(test)]
pub(crate) fn mean_scores(
    design: &Design,
    q: usize,
    kind: EstimatingKind,
    psi: &[f64],
) -> Vec<f64> {
    let (sum, _, _) = score_sums(design, q, kind, psi, None, false).unwrap();
    sum.iter().map(|v| v / design.len() as f64).collect()
}
