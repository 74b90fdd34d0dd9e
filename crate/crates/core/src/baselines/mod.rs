//! Reference volatility recursions, the classic threshold fits, the full
//! QMLE of the symmetric model and a Black-Scholes pricer.

mod canned;
mod full_qmle;
mod pricing;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::rng::CounterRng;

pub use canned::{canned_spec, canned_specs, CannedSpec};
pub use full_qmle::{tar_arch_full_qmle, tar_arch_full_qmle_with};
pub use pricing::black_scholes_price;

/// `E|z|` for a standard normal `z`.
pub const MEAN_ABS_NORMAL: f64 = 0.797_884_560_802_865_4;

fn check_alpha0(alpha0: f64) -> Result<()> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(ModelError::InvalidParameter("alpha0 must be positive".into()));
    }
    Ok(())
}

fn check_nonnegative(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(ModelError::InvalidParameter(format!(
            "{name} must be finite and non-negative"
        )));
    }
    Ok(())
}

/// ARCH(q) variances `h_t = alpha0 + sum_i alpha_i e_{t-i}^2`, presample
/// residuals zero.
pub fn arch_variance(alpha0: f64, alphas: &[f64], residuals: &[f64]) -> Result<Vec<f64>> {
    check_alpha0(alpha0)?;
    check_nonnegative("ARCH coefficients", alphas)?;
    Ok((0..residuals.len())
        .map(|t| {
            let mut h = alpha0;
            for (i, a) in alphas.iter().enumerate().take(t) {
                h += a * residuals[t - i - 1].powi(2);
            }
            h
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    alpha0: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl GarchParams {
    pub fn new(alpha0: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        check_alpha0(alpha0)?;
        check_nonnegative("ARCH coefficients", &alphas)?;
        check_nonnegative("GARCH coefficients", &betas)?;
        Ok(Self {
            alpha0,
            alphas,
            betas,
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `sum alpha + sum beta < 1`.
    pub fn is_covariance_stationary(&self) -> bool {
        self.alphas.iter().sum::<f64>() + self.betas.iter().sum::<f64>() < 1.0
    }
}

/// GARCH variances; presample residuals are zero and presample variances
/// equal `presample_h`.
pub fn garch_variance(params: &GarchParams, residuals: &[f64], presample_h: f64) -> Vec<f64> {
    let mut h: Vec<f64> = Vec::with_capacity(residuals.len());
    for t in 0..residuals.len() {
        let mut v = params.alpha0;
        for (i, a) in params.alphas.iter().enumerate().take(t) {
            v += a * residuals[t - i - 1].powi(2);
        }
        for (j, b) in params.betas.iter().enumerate() {
            v += b * if t > j { h[t - j - 1] } else { presample_h };
        }
        h.push(v);
    }
    h
}

/// Innovations of a GARCH path driven by the counter-based normal stream.
pub fn simulate_garch(params: &GarchParams, n: usize, burn_in: usize, seed: u64) -> Vec<f64> {
    let rng = CounterRng::new(seed);
    let (q, p) = (params.alphas.len(), params.betas.len());
    let total = n + burn_in;
    let mut e = vec![0.0f64; total];
    let mut h = vec![0.0; total];
    let start_h = if params.is_covariance_stationary() {
        params.alpha0 / (1.0 - params.alphas.iter().sum::<f64>() - params.betas.iter().sum::<f64>())
    } else {
        params.alpha0
    };
    for t in 0..total {
        let mut v = params.alpha0;
        for i in 0..q.min(t) {
            v += params.alphas[i] * e[t - i - 1].powi(2);
        }
        for j in 0..p {
            v += params.betas[j] * if t > j { h[t - j - 1] } else { start_h };
        }
        h[t] = v;
        e[t] = v.sqrt() * rng.standard_normal(t as u64);
    }
    e.split_off(burn_in)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgarchParams {
    pub gamma0: f64,
    pub gamma1: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl EgarchParams {
    pub fn new(gamma0: f64, gamma1: f64, omega: f64, lambda: f64) -> Result<Self> {
        if ![gamma0, gamma1, omega, lambda].iter().all(|v| v.is_finite()) {
            return Err(ModelError::InvalidParameter("EGARCH parameters must be finite".into()));
        }
        Ok(Self {
            gamma0,
            gamma1,
            omega,
            lambda,
        })
    }

    /// `|gamma1| < 1`.
    pub fn is_stationary(&self) -> bool {
        self.gamma1.abs() < 1.0
    }

    pub fn g(&self, z: f64) -> f64 {
        egarch_g(self.omega, self.lambda, z)
    }
}

/// News term `omega z + lambda (|z| - E|z|)`.
pub fn egarch_g(omega: f64, lambda: f64, z: f64) -> f64 {
    omega * z + lambda * (z.abs() - MEAN_ABS_NORMAL)
}

/// Log variances `ln h_t = gamma0 + gamma1 ln h_{t-1} + g(z_{t-1})`.
///
/// Entry `t` uses the shock at `t - 1`; the first entry uses only
/// `presample_logh`, with no news term.
pub fn egarch_log_variance(params: &EgarchParams, shocks: &[f64], presample_logh: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(shocks.len());
    let mut prev = presample_logh;
    for t in 0..shocks.len() {
        let news = if t == 0 { 0.0 } else { params.g(shocks[t - 1]) };
        prev = params.gamma0 + params.gamma1 * prev + news;
        out.push(prev);
    }
    out
}
