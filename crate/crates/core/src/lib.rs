//! Threshold autoregression with asymmetric ARCH errors: simulation,
//! concentrated quasi-maximum-likelihood estimation, threshold and delay
//! search, baseline volatility models and a Monte Carlo harness.

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod model;
pub mod montecarlo;
pub mod optim;
pub mod rng;
mod serde_nan;
pub mod simulate;
pub mod stats;

pub use error::{ModelError, Result};
pub use model::{AarchParams, ModelSpec, TarParams, ThresholdPartition, TimeSeries};
