use serde::Serialize;
use tar_aarch::baselines::black_scholes_price;

use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, write_all};
use crate::{Format, Globals};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Spot price S.
    #[arg(long)]
    spot: f64,
    /// Strike K.
    #[arg(long)]
    strike: f64,
    /// Continuously compounded risk-free rate r.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Volatility sigma (annualized).
    #[arg(long)]
    sigma: f64,
    /// Time to expiry tau in years.
    #[arg(long)]
    tau: f64,
}

/// `v` rounded to 10 significant digits.
pub fn sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (9 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Serialize)]
struct Report<'a> {
    inputs: &'a Args,
    price: f64,
}

pub fn run(args: &Args, globals: &Globals) -> CliResult<()> {
    let price = black_scholes_price(args.spot, args.strike, args.rate, args.sigma, args.tau)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let bytes = match globals.format {
        Some(Format::Json) => json_bytes(&Report { inputs: args, price }),
        _ => format!("{}\n", sig10(price)).into_bytes(),
    };
    write_all(globals.output.as_ref(), &bytes)
}
