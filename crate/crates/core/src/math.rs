//! Numeric helpers shared by the table builders.
//!
//! Everything that feeds a frequency table goes through `libm` so the encoder
//! and decoder evaluate `erf`, `exp` and `log` with the same bits on every
//! platform. `libm` carries the FreeBSD/musl rational approximations, whose
//! error is at the ulp level.

use std::f64::consts::{LN_2, SQRT_2};

/// `0.5 * ln(2π)`.
pub const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

/// Rounds half away from zero. Used for synthesis and mean removal.
pub fn round_half_away(x: f64) -> f64 {
    // f64::round already rounds half-way cases away from zero.
    x.round()
}

/// Standard normal cdf evaluated through `erfc` for accuracy in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Mass of `N(0, sigma)` on the bin `[a - 0.5, a + 0.5]` for `a >= 0`.
///
/// Written so both tails are computed from `erfc` differences rather than
/// `1 - cdf`, and so the result depends on `|a|` only.
pub fn centered_bin_mass(a: u32, sigma: f64) -> f64 {
    let scale = sigma * SQRT_2;
    if a == 0 {
        libm::erf(0.5 / scale)
    } else {
        let a = f64::from(a);
        0.5 * (libm::erfc((a - 0.5) / scale) - libm::erfc((a + 0.5) / scale))
    }
}

/// Log of the Gaussian density `N(x; mean, sigma)`.
pub fn normal_log_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -0.5 * z * z - libm::log(sigma) - HALF_LN_TAU
}

/// `log(sum(exp(v)))`, tolerant of `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Converts nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// `-n * log2(p)` with the convention that zero counts contribute nothing.
pub fn code_length(count: u64, prob: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        -(count as f64) * prob.log2()
    }
}

/// Shannon entropy in bits of a count vector, times the total count.
pub fn empirical_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .map(|&c| code_length(c, c as f64 / n))
        .sum()
}

/// 64-bit FNV-1a, used to fingerprint learned tables and side information.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
