//! Sample-path generation and price-to-return transforms.

use std::io::Write;

use crate::error::{ModelError, Result};
use crate::model::{mean_at, ModelSpec, TimeSeries};
use crate::rng::CounterRng;

pub const DEFAULT_BURN_IN: usize = 500;

/// Paths whose magnitude exceeds this are reported as explosive.
pub const EXPLOSION_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Presample values, chronological. Missing values default to zero.
    pub init_values: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            burn_in: DEFAULT_BURN_IN,
            seed,
            init_values: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_init_values(mut self, values: Vec<f64>) -> Self {
        self.init_values = Some(values);
        self
    }
}

/// A simulated path with everything needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub series: TimeSeries,
    /// `e_t = z_t * sqrt(h_t)`.
    pub innovations: Vec<f64>,
    pub variances: Vec<f64>,
    pub shocks: Vec<f64>,
}

impl SimulatedPath {
    /// CSV with columns `index,x,h,z`, numbers at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,x,h,z")?;
        for (t, ((x, h), z)) in self
            .series
            .values()
            .iter()
            .zip(&self.variances)
            .zip(&self.shocks)
            .enumerate()
        {
            writeln!(out, "{t},{},{},{}", fmt17(*x), fmt17(*h), fmt17(*z))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Simulate `config.n` observations after discarding `config.burn_in`.
///
/// Shock `z_t` is draw `t` of the counter stream for `config.seed`, counting
/// from the first burn-in step. Presample innovations are zero.
pub fn simulate_path(spec: &ModelSpec, config: &SimConfig) -> Result<SimulatedPath> {
    if config.n == 0 {
        return Err(ModelError::InvalidParameter("n must be at least 1".into()));
    }
    let lag = spec.mean_lag();
    let q = spec.q();
    let aarch = spec.aarch();
    let rng = CounterRng::new(config.seed);

    let mut x = vec![0.0; lag];
    if let Some(init) = &config.init_values {
        if let Some(index) = init.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        // right-align the supplied presample values
        let take = init.len().min(lag);
        x[lag - take..].copy_from_slice(&init[init.len() - take..]);
    }
    let total = config.burn_in + config.n;
    x.reserve(total);
    let mut eps = Vec::with_capacity(total);
    let mut h = Vec::with_capacity(total);
    let mut z = Vec::with_capacity(total);

    for step in 0..total {
        let mut var = aarch.alpha0();
        for i in 0..q.min(step) {
            var += aarch.term(i, eps[step - 1 - i]);
        }
        let shock = rng.standard_normal(step as u64);
        let e = shock * var.sqrt();
        let now = x.len();
        let value = mean_at(spec, |k| x[now - k]) + e;
        if !value.is_finite() || value.abs() > EXPLOSION_BOUND || !var.is_finite() {
            return Err(ModelError::Explosive { step, value });
        }
        x.push(value);
        eps.push(e);
        h.push(var);
        z.push(shock);
    }

    let keep = lag + config.burn_in;
    Ok(SimulatedPath {
        series: TimeSeries::new(x.split_off(keep))?,
        innovations: eps.split_off(config.burn_in),
        variances: h.split_off(config.burn_in),
        shocks: z.split_off(config.burn_in),
    })
}

fn require_len(prices: &TimeSeries) -> Result<()> {
    if prices.len() < 2 {
        return Err(ModelError::SeriesTooShort {
            len: prices.len(),
            needed: 1,
        });
    }
    Ok(())
}

/// `scale * ln(p_t / p_{t-1})`, with scale 100 when `scale100`.
pub fn log_return_transform(prices: &TimeSeries, scale100: bool) -> Result<TimeSeries> {
    require_len(prices)?;
    let p = prices.values();
    if let Some(index) = p.iter().position(|&v| v <= 0.0) {
        return Err(ModelError::Domain {
            index,
            message: format!("price {} is not positive", p[index]),
        });
    }
    let scale = if scale100 { 100.0 } else { 1.0 };
    TimeSeries::new(p.windows(2).map(|w| scale * (w[1] / w[0]).ln()).collect())
}

/// `(p_t - p_{t-1}) / p_{t-1}`.
pub fn relative_return_transform(prices: &TimeSeries) -> Result<TimeSeries> {
    require_len(prices)?;
    let p = prices.values();
    // the last price is never a divisor, but a zero there is still not a price
    if let Some(index) = p.iter().position(|&v| v == 0.0) {
        return Err(ModelError::Domain {
            index,
            message: "price is zero".into(),
        });
    }
    TimeSeries::new(p.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect())
}

/// Square-root Box-Cox transform `2 (sqrt(w) - 1)` used for sunspot counts.
pub fn box_cox_sunspot_transform(w: &TimeSeries) -> Result<TimeSeries> {
    let v = w.values();
    if let Some(index) = v.iter().position(|&x| x < 0.0) {
        return Err(ModelError::Domain {
            index,
            message: format!("value {} is negative", v[index]),
        });
    }
    TimeSeries::new(v.iter().map(|x| 2.0 * (x.sqrt() - 1.0)).collect())
}
