//! Counter-based random streams.
//!
//! Draw `i` of the stream keyed by `seed` is a pure function of `(seed, i)`:
//! the SplitMix64 output at position `i + 1` of the sequence whose start is the
//! mixed seed. Nothing depends on call order or on which thread asks, so
//! replicates can be generated in any order and still agree bit for bit.
//!
//! Standard normals come from the inverse CDF applied to one uniform per draw.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Stafford variant 13), a bijective 64-bit avalanche mix.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for Monte Carlo cell `(n, replicate)` derived from `base`.
///
/// `mix64(mix64(mix64(base) ^ n) ^ replicate)`; each stage is a bijection, so
/// distinct `(n, replicate)` pairs under one base never share a seed.
pub fn derive_seed(base: u64, n: u64, replicate: u64) -> u64 {
    mix64(mix64(mix64(base) ^ n) ^ replicate)
}

/// Stream of uniforms and normals addressed by draw index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ 0x5851_F42D_4C95_7F2D),
        }
    }

    #[inline]
    pub fn bits(&self, index: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        ((self.bits(index) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&self, index: u64) -> f64 {
        inverse_normal_cdf(self.uniform(index))
    }
}

/// Standard normal quantile, polished by one Newton step on the lower tail.
pub fn inverse_normal_cdf(u: f64) -> f64 {
    if u > 0.5 {
        return -inverse_normal_cdf(1.0 - u);
    }
    let n = standard();
    let x = n.inverse_cdf(u);
    if !x.is_finite() {
        return x;
    }
    let density = n.pdf(x);
    if density > 0.0 {
        x - (n.cdf(x) - u) / density
    } else {
        x
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    standard().cdf(x)
}

fn standard() -> Normal {
    Normal::standard()
}
