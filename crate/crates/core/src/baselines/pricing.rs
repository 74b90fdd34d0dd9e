use crate::error::{ModelError, Result};
use crate::rng::normal_cdf;

/// European call price `S N(d1) - K exp(-r tau) N(d1 - sigma sqrt(tau))` with
/// `d1 = (ln(S/K) + (r + sigma^2/2) tau) / (sigma sqrt(tau))`.
pub fn black_scholes_price(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> Result<f64> {
    let bad = |what: &str| Err(ModelError::InvalidParameter(what.into()));
    if !(s > 0.0 && s.is_finite()) {
        return bad("spot must be positive");
    }
    if !(k >= 0.0 && k.is_finite()) {
        return bad("strike must be non-negative");
    }
    if !r.is_finite() {
        return bad("rate must be finite");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return bad("volatility must be positive");
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return bad("maturity must be positive");
    }
    if k == 0.0 {
        return Ok(s);
    }
    let vol = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
    let discounted = k * (-r * tau).exp();
    Ok(s * normal_cdf(d1) - discounted * normal_cdf(d1 - vol))
}
