//! The two concentrated steps.

use nalgebra::{DMatrix, DVector};

use crate::model::{AarchParams, ModelSpec, TarParams, ThresholdPartition, TimeSeries};
use crate::optim::{newton_maximize, OptimOptions};

use super::{qll_terms, AarchConstraint, Design, EstimationError};

pub(crate) const THETA_TOL: f64 = 1e-10;
const THETA_MAX_PASSES: usize = 500;

/// Mean step on a prepared design.
pub(crate) fn theta_step_design(
    design: &Design,
    aarch: &AarchParams,
    theta: &[f64],
) -> Result<Vec<f64>, EstimationError> {
    for (regime, &count) in design.counts.iter().enumerate() {
        if count == 0 {
            return Err(EstimationError::EmptyRegime { regime });
        }
        if count < design.width {
            return Err(EstimationError::SingularRegime {
                regime,
                observations: count,
            });
        }
    }
    let constant = aarch.alphas().iter().chain(aarch.betas()).all(|&c| c == 0.0);
    let mut current = theta.to_vec();
    for pass in 1..=THETA_MAX_PASSES {
        let e = design.residuals(&current);
        let h = design.variances(aarch, &e);
        let next = weighted_least_squares(design, &h)?;
        let moved = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        // with constant weights the first solve is already the fixed point
        if moved < THETA_TOL || constant {
            return Ok(current);
        }
        if pass == THETA_MAX_PASSES {
            break;
        }
    }
    Err(EstimationError::ThetaNotConverged {
        iterations: THETA_MAX_PASSES,
        best: TarParams::from_flat(design.regimes, design.width - 1, current)?,
    })
}

/// Per-regime solve of `sum w z z' theta_j = sum w z y` with `w = 1/h`.
fn weighted_least_squares(design: &Design, h: &[f64]) -> Result<Vec<f64>, EstimationError> {
    let w = design.width;
    let mut xtx = vec![DMatrix::<f64>::zeros(w, w); design.regimes];
    let mut xty = vec![DVector::<f64>::zeros(w); design.regimes];
    for s in 0..design.len() {
        let j = design.regime[s];
        let row = design.row(s);
        let weight = 1.0 / h[s];
        let (a, b) = (&mut xtx[j], &mut xty[j]);
        for r in 0..w {
            let wr = weight * row[r];
            b[r] += wr * design.y[s];
            for c in 0..=r {
                a[(r, c)] += wr * row[c];
            }
        }
    }
    let mut theta = Vec::with_capacity(w * design.regimes);
    for (regime, (mut a, b)) in xtx.into_iter().zip(xty).enumerate() {
        for r in 0..w {
            for c in r + 1..w {
                a[(r, c)] = a[(c, r)];
            }
        }
        let singular = EstimationError::SingularRegime {
            regime,
            observations: design.counts[regime],
        };
        let chol = a.cholesky().ok_or(singular.clone())?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        if lo <= 1e-7 * hi {
            return Err(singular);
        }
        theta.extend(chol.solve(&b).iter());
    }
    Ok(theta)
}

/// Weighted least-squares mean step with the variance parameters held fixed.
///
/// Weights `1/h_t` are recomputed from the current residuals after every
/// solve until the coefficients move by less than `1e-10`.
pub fn theta_step(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    aarch: &AarchParams,
    theta_init: &TarParams,
) -> Result<TarParams, EstimationError> {
    let design = Design::new(series, partition, theta_init.order(), aarch.order(), None)?;
    if theta_init.regimes() != partition.regimes() {
        return Err(crate::error::ModelError::Dimension(format!(
            "{} coefficient rows for {} regimes",
            theta_init.regimes(),
            partition.regimes()
        ))
        .into());
    }
    let theta = theta_step_design(&design, aarch, theta_init.as_flat())?;
    Ok(TarParams::from_flat(partition.regimes(), theta_init.order(), theta)?)
}

/// Average `qll` with gradient and Hessian in `(ln alpha0, alpha.., beta..)`.
fn alpha_objective(
    e: &[f64],
    q: usize,
    constraint: AarchConstraint,
    psi: &[f64],
) -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
    let mut natural = psi.to_vec();
    natural[0] = psi[0].exp();
    if !natural[0].is_finite() || natural[0] <= 0.0 {
        return None;
    }
    let aarch = constraint.unpack(q, &natural).ok()?;
    let k = psi.len();
    let n_alpha = if constraint == AarchConstraint::Homoskedastic { 0 } else { q };
    let with_beta = constraint == AarchConstraint::Free;

    let mut value = 0.0;
    let mut grad = vec![0.0; k];
    let mut hess = DMatrix::<f64>::zeros(k, k);
    let mut dh = vec![0.0; k];
    let (alphas, betas) = (aarch.alphas(), aarch.betas());
    for s in 0..e.len() {
        dh.iter_mut().for_each(|v| *v = 0.0);
        dh[0] = 1.0;
        let mut h = aarch.alpha0();
        for i in 0..q.min(s) {
            let lag = e[s - i - 1];
            let u = alphas[i] * lag.abs() + betas[i] * lag;
            h += u * u;
            if i < n_alpha {
                dh[1 + i] = 2.0 * u * lag.abs();
            }
            if with_beta {
                dh[1 + q + i] = 2.0 * u * lag;
            }
        }
        let e2 = e[s] * e[s];
        value += -0.5 * (h.ln() + e2 / h);
        let a = 0.5 * (e2 - h) / (h * h);
        let b = (h - 2.0 * e2) / (2.0 * h * h * h);
        for r in 0..k {
            grad[r] += a * dh[r];
            for c in 0..=r {
                hess[(r, c)] += b * dh[r] * dh[c];
            }
        }
        for i in 0..n_alpha.min(s) {
            let lag = e[s - i - 1];
            hess[(1 + i, 1 + i)] += a * 2.0 * lag * lag;
            if with_beta {
                hess[(1 + q + i, 1 + q + i)] += a * 2.0 * lag * lag;
                hess[(1 + q + i, 1 + i)] += a * 2.0 * lag.abs() * lag;
            }
        }
    }
    for r in 0..k {
        for c in r + 1..k {
            hess[(r, c)] = hess[(c, r)];
        }
    }
    let scale = 1.0 / e.len() as f64;
    value *= scale;
    grad.iter_mut().for_each(|g| *g *= scale);
    hess *= scale;
    // chain rule for the log-transformed intercept
    let a0 = aarch.alpha0();
    let g0 = grad[0];
    hess[(0, 0)] = a0 * a0 * hess[(0, 0)] + a0 * g0;
    for c in 1..k {
        hess[(0, c)] *= a0;
        hess[(c, 0)] *= a0;
    }
    grad[0] *= a0;
    value.is_finite().then_some((value, grad, hess))
}

/// Analytic gradient of `qll` with respect to `(alpha0, alpha_1..q, beta_1..q)`
/// for fixed residuals (presample residuals zero).
pub fn variance_scores(residuals: &[f64], aarch: &AarchParams) -> Vec<f64> {
    let mut psi = AarchConstraint::Free.pack(aarch);
    psi[0] = psi[0].ln();
    let (_, grad, _) = alpha_objective(residuals, aarch.order(), AarchConstraint::Free, &psi)
        .expect("valid parameters give a finite objective");
    let n = residuals.len() as f64;
    let mut g: Vec<f64> = grad.iter().map(|v| v * n).collect();
    g[0] /= aarch.alpha0();
    g
}

/// Variance step on fixed residuals.
pub(crate) fn alpha_step_residuals(
    e: &[f64],
    aarch_init: &AarchParams,
    constraint: AarchConstraint,
) -> Result<AarchParams, EstimationError> {
    let q = aarch_init.order();
    let mut psi = constraint.pack(aarch_init);
    psi[0] = psi[0].ln();
    let opts = OptimOptions {
        max_iter: 200,
        grad_tol: 1e-11,
        rel_tol: 1e-15,
        loose_grad_tol: 1e-9,
    };
    let outcome = newton_maximize(|x| alpha_objective(e, q, constraint, x), &psi, &opts)
        .ok_or_else(|| EstimationError::NonFinite("variance step start".into()))?;
    let mut natural = outcome.x.clone();
    natural[0] = natural[0].exp();
    let best = constraint.unpack(q, &natural)?.canonical();
    if outcome.converged {
        Ok(best)
    } else {
        Err(EstimationError::AlphaNotConverged {
            iterations: outcome.iterations,
            best,
        })
    }
}

/// Variance step with every `alpha_i`, `beta_i` free.
pub fn alpha_step(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    tar: &TarParams,
    aarch_init: &AarchParams,
) -> Result<AarchParams, EstimationError> {
    alpha_step_with(series, partition, tar, aarch_init, AarchConstraint::Free)
}

/// Maximize `qll` over the variance parameters with the mean coefficients
/// (and therefore the residuals) fixed.
///
/// The intercept is optimized on the log scale. The result is returned in the
/// canonical form `alpha_i >= |beta_i|`.
pub fn alpha_step_with(
    series: &TimeSeries,
    partition: &ThresholdPartition,
    tar: &TarParams,
    aarch_init: &AarchParams,
    constraint: AarchConstraint,
) -> Result<AarchParams, EstimationError> {
    let design = Design::new(series, partition, tar.order(), aarch_init.order(), None)?;
    let e = design.residuals(tar.as_flat());
    alpha_step_residuals(&e, &constraint.apply(aarch_init), constraint)
}

/// Values of the two families of mean estimating equations.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationResiduals {
    /// `sum e_t / h_t 1(x_{t-d} in R_j)`, one per regime.
    pub intercept: Vec<f64>,
    /// `sum e_t / h_t x_{t-k} 1(x_{t-d} in R_j)`, `[regime][k-1]`.
    pub slopes: Vec<Vec<f64>>,
}

impl EquationResiduals {
    pub fn max_abs(&self) -> f64 {
        self.intercept
            .iter()
            .chain(self.slopes.iter().flatten())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluate the mean estimating equations at `spec`.
pub fn theta_equation_residuals(
    series: &TimeSeries,
    spec: &ModelSpec,
) -> Result<EquationResiduals, EstimationError> {
    let design = Design::new(series, spec.partition(), spec.p(), spec.q(), None)?;
    let e = design.residuals(spec.tar().as_flat());
    let h = design.variances(spec.aarch(), &e);
    let mut intercept = vec![0.0; design.regimes];
    let mut slopes = vec![vec![0.0; spec.p()]; design.regimes];
    for s in 0..design.len() {
        let j = design.regime[s];
        let r = e[s] / h[s];
        let row = design.row(s);
        intercept[j] += r;
        for k in 1..design.width {
            slopes[j][k - 1] += r * row[k];
        }
    }
    Ok(EquationResiduals { intercept, slopes })
}

/// `qll` for a flat theta and variance parameters on a design.
pub(crate) fn design_qll(design: &Design, theta: &[f64], aarch: &AarchParams) -> f64 {
    let e = design.residuals(theta);
    let h = design.variances(aarch, &e);
    qll_terms(&e, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::gaussian_qll;
    use crate::model::conditional_mean;
    use crate::simulate::{simulate_path, SimConfig};

    fn ar1_series() -> TimeSeries {
        let spec = ModelSpec::new(
            ThresholdPartition::single(1).unwrap(),
            TarParams::new(vec![vec![0.0, 0.5]]).unwrap(),
            AarchParams::homoskedastic(1.0, 1).unwrap(),
        )
        .unwrap();
        simulate_path(&spec, &SimConfig::new(800, 21)).unwrap().series
    }

    // closed-form simple regression of x_t on (1, x_{t-1}), t = 2..n
    fn ols_oracle(x: &[f64]) -> (f64, f64) {
        let (xs, ys) = (&x[..x.len() - 1], &x[1..]);
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (my - slope * mx, slope)
    }

    #[test]
    fn constant_variance_mean_step_is_ols() {
        let series = ar1_series();
        let part = ThresholdPartition::single(1).unwrap();
        let got = theta_step(
            &series,
            &part,
            &AarchParams::homoskedastic(0.7, 1).unwrap(),
            &TarParams::zeros(1, 1),
        )
        .unwrap();
        let (c, b) = ols_oracle(series.values());
        assert!((got.row(0)[0] - c).abs() < 1e-10);
        assert!((got.row(0)[1] - b).abs() < 1e-10);
    }

    #[test]
    fn noiseless_data_recovers_coefficients() {
        let spec = ModelSpec::new(
            ThresholdPartition::new(2, vec![3.25]).unwrap(),
            TarParams::new(vec![vec![0.62, 1.25, -0.43], vec![2.25, 1.52, -1.24]]).unwrap(),
            AarchParams::new(0.04, vec![0.3], vec![0.1]).unwrap(),
        )
        .unwrap();
        // the noise-free skeleton settles on a cycle that visits both regimes
        let mut clean = vec![1.9, 3.4];
        for _ in 0..60 {
            let m = conditional_mean(&spec, &clean).unwrap();
            clean.push(m);
        }
        let series = TimeSeries::new(clean).unwrap();
        let got = theta_step(&series, spec.partition(), spec.aarch(), &TarParams::zeros(2, 2)).unwrap();
        for (a, b) in got.as_flat().iter().zip(spec.tar().as_flat()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn mean_step_solves_its_equations() {
        let spec = crate::estimation::tests::reference();
        let path = simulate_path(&spec, &SimConfig::new(2000, 9)).unwrap();
        let got = theta_step(&path.series, spec.partition(), spec.aarch(), &TarParams::zeros(2, 1)).unwrap();
        let fitted = spec.with_tar(got).unwrap();
        let eq = theta_equation_residuals(&path.series, &fitted).unwrap();
        assert!(eq.max_abs() < 1e-8, "{eq:?}");
    }

    #[test]
    fn empty_and_singular_regimes_are_reported() {
        let series = TimeSeries::new((0..50).map(|i| i as f64 * 0.1).collect()).unwrap();
        let a = AarchParams::homoskedastic(1.0, 1).unwrap();
        let part = ThresholdPartition::new(1, vec![100.0]).unwrap();
        assert!(matches!(
            theta_step(&series, &part, &a, &TarParams::zeros(2, 1)),
            Err(EstimationError::EmptyRegime { regime: 1 })
        ));
        let constant = TimeSeries::new(vec![1.0; 30]).unwrap();
        let single = ThresholdPartition::single(1).unwrap();
        assert!(matches!(
            theta_step(&constant, &single, &a, &TarParams::zeros(1, 1)),
            Err(EstimationError::SingularRegime { regime: 0, .. })
        ));
    }

    #[test]
    fn variance_step_closed_form_for_constant_variance() {
        let series = TimeSeries::new(vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let part = ThresholdPartition::single(1).unwrap();
        let got = alpha_step_with(
            &series,
            &part,
            &TarParams::zeros(1, 0),
            &AarchParams::homoskedastic(3.0, 1).unwrap(),
            AarchConstraint::Homoskedastic,
        )
        .unwrap();
        assert!((got.alpha0() - 1.0).abs() < 1e-10);

        let noise = ar1_series();
        let e = noise.values()[1..].to_vec();
        let mean_sq = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        let got = alpha_step_with(
            &noise,
            &part,
            &TarParams::zeros(1, 0),
            &AarchParams::homoskedastic(0.2, 1).unwrap(),
            AarchConstraint::Homoskedastic,
        )
        .unwrap();
        assert!((got.alpha0() - mean_sq).abs() < 1e-9 * mean_sq);
    }

    #[test]
    fn variance_step_increases_the_likelihood_and_zeroes_the_gradient() {
        let spec = crate::estimation::tests::reference();
        let path = simulate_path(&spec, &SimConfig::new(5000, 31)).unwrap();
        let start = AarchParams::new(0.2, vec![0.1], vec![0.0]).unwrap();
        let got = alpha_step(&path.series, spec.partition(), spec.tar(), &start).unwrap();
        let before = gaussian_qll(&spec.with_aarch(start).unwrap(), &path.series).unwrap();
        let after = gaussian_qll(&spec.with_aarch(got.clone()).unwrap(), &path.series).unwrap();
        assert!(after > before);
        assert!(got.alphas()[0] >= got.betas()[0].abs());

        let design = Design::new(&path.series, spec.partition(), 1, 1, None).unwrap();
        let e = design.residuals(spec.tar().as_flat());
        let mut psi = AarchConstraint::Free.pack(&got);
        psi[0] = psi[0].ln();
        let (_, grad, _) = alpha_objective(&e, 1, AarchConstraint::Free, &psi).unwrap();
        let natural_grad0 = grad[0] / got.alpha0();
        assert!(natural_grad0.abs() < 1e-6 && grad[1].abs() < 1e-6 && grad[2].abs() < 1e-6);
    }

    #[test]
    fn analytic_hessian_matches_differences_of_gradient() {
        let e: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * 0.8).collect();
        let cases: [(usize, AarchConstraint, Vec<f64>); 4] = [
            (1, AarchConstraint::Free, vec![-1.5, 0.35, 0.15]),
            (2, AarchConstraint::Free, vec![-1.5, 0.35, 0.2, 0.15, -0.1]),
            (2, AarchConstraint::Symmetric, vec![-1.5, 0.35, 0.2]),
            (1, AarchConstraint::Homoskedastic, vec![-1.5]),
        ];
        for (q, constraint, psi) in cases {
            let k = psi.len();
            let (_, _, hess) = alpha_objective(&e, q, constraint, &psi).unwrap();
            for c in 0..k {
                let step = 1e-6;
                let mut up = psi.clone();
                let mut dn = psi.clone();
                up[c] += step;
                dn[c] -= step;
                let gu = alpha_objective(&e, q, constraint, &up).unwrap().1;
                let gd = alpha_objective(&e, q, constraint, &dn).unwrap().1;
                for r in 0..k {
                    let fd = (gu[r] - gd[r]) / (2.0 * step);
                    assert!(
                        (fd - hess[(r, c)]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{constraint:?} q={q} ({r},{c}) {fd} vs {}",
                        hess[(r, c)]
                    );
                }
            }
        }
    }
}
