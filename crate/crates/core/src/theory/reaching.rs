//! Law of the last random acceptance.
//!
//! With acceptance probabilities majorised by `rho_k = lambda^k p`, the time
//! `T = inf { t : U_k >= rho_k for all k >= t }` after which no random
//! acceptance can happen satisfies `P(T <= t) = prod_{k >= t} (1 - rho_k)`.
//! The product converges because the `rho_k` are summable.

use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// Factors with `lambda^k p` below this are dropped from the product.
pub const PRODUCT_CUTOFF: f64 = 1e-16;

/// Sampling stops once `sum_{k >= K} lambda^k p` is below this.
pub const SAMPLING_RESIDUAL: f64 = 1e-12;

fn check(lambda: f64, p: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "lambda = {lambda} outside (0, 1)"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(alloc::format!(
            "p_relax = {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// A truncated product with a bound on what the truncation dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedProduct {
    pub value: f64,
    /// First index whose factor was dropped.
    pub truncated_at: u64,
    /// Upper bound on `value - exact`, from `1 - prod(1 - x) <= sum x`.
    pub error_bound: f64,
}

/// First `k >= t` with `lambda^k p < PRODUCT_CUTOFF`.
fn cutoff_index(lambda: f64, p: f64, t: u64) -> u64 {
    if p == 0.0 {
        return t;
    }
    let k = libm::ceil(libm::log(PRODUCT_CUTOFF / p) / libm::log(lambda));
    let mut k = if k.is_finite() && k > 0.0 {
        k as u64
    } else {
        0
    };
    // The closed form can be off by one in floating point.
    while k > 0 && p * libm::pow(lambda, (k - 1) as f64) < PRODUCT_CUTOFF {
        k -= 1;
    }
    while p * libm::pow(lambda, k as f64) >= PRODUCT_CUTOFF {
        k += 1;
    }
    k.max(t)
}

/// `P(T <= t) = prod_{k >= t} (1 - lambda^k p)` with its truncation error.
pub fn reaching_time_cdf_detailed(lambda: f64, p: f64, t: u64) -> Result<TruncatedProduct> {
    check(lambda, p)?;
    let end = cutoff_index(lambda, p, t);
    let mut log_sum = 0.0;
    let mut x = if p == 0.0 {
        0.0
    } else {
        p * libm::pow(lambda, t as f64)
    };
    for _ in t..end {
        if x >= 1.0 {
            return Ok(TruncatedProduct {
                value: 0.0,
                truncated_at: end,
                error_bound: 0.0,
            });
        }
        log_sum += libm::log1p(-x);
        x *= lambda;
    }
    let tail = if p == 0.0 {
        0.0
    } else {
        p * libm::pow(lambda, end as f64) / (1.0 - lambda)
    };
    let value = libm::exp(log_sum);
    Ok(TruncatedProduct {
        value,
        truncated_at: end,
        error_bound: value * tail.min(1.0),
    })
}

pub fn reaching_time_cdf(lambda: f64, p: f64, t: u64) -> Result<f64> {
    Ok(reaching_time_cdf_detailed(lambda, p, t)?.value)
}

/// `P(T <= t)` for every `t` in `0..=t_max`, sharing one pass over the
/// factors.
pub fn reaching_time_cdf_table(lambda: f64, p: f64, t_max: u64) -> Result<Vec<f64>> {
    check(lambda, p)?;
    let end = cutoff_index(lambda, p, t_max + 1);
    // Suffix sums of log(1 - x_k), accumulated from the smallest factor up.
    let mut logs = Vec::with_capacity(end as usize);
    let mut x = p;
    for _ in 0..end {
        logs.push(if x >= 1.0 {
            f64::NEG_INFINITY
        } else {
            libm::log1p(-x)
        });
        x *= lambda;
    }
    let mut table = alloc::vec![0.0; t_max as usize + 1];
    let mut acc = 0.0;
    for k in (0..end as usize).rev() {
        acc += logs[k];
        if k <= t_max as usize {
            table[k] = libm::exp(acc);
        }
    }
    Ok(table)
}

/// Closed-form lower bound `exp(-x / ((1 - lambda)(1 - x)))`, `x = lambda^t p`.
pub fn corollary_lower_bound(lambda: f64, p: f64, t: u64) -> Result<f64> {
    check(lambda, p)?;
    if t == 0 {
        return Err(Error::InvalidConfig("the lower bound needs t >= 1".into()));
    }
    let x = p * libm::pow(lambda, t as f64);
    if x >= 1.0 {
        return Err(Error::BoundUndefined(x));
    }
    Ok(libm::exp(-x / ((1.0 - lambda) * (1.0 - x))))
}

/// Number of uniforms after which the remaining acceptance mass drops below
/// `SAMPLING_RESIDUAL`.
pub fn sampling_horizon(lambda: f64, p: f64) -> Result<u64> {
    check(lambda, p)?;
    if p == 0.0 {
        return Ok(0);
    }
    let mut k = 0u64;
    let mut x = p;
    while x / (1.0 - lambda) >= SAMPLING_RESIDUAL {
        x *= lambda;
        k += 1;
    }
    Ok(k)
}

/// `T` computed from a stream of uniforms `U_0, U_1, ...`: one past the last
/// `k` with `U_k < lambda^k p`, or 0 if there is none. Consumes
/// [`sampling_horizon`] uniforms.
pub fn t_rho_bar_from_uniforms<F: FnMut() -> f64>(lambda: f64, p: f64, mut next: F) -> Result<u64> {
    let k_max = sampling_horizon(lambda, p)?;
    let mut last = 0;
    let mut x = p;
    for k in 0..k_max {
        if next() < x {
            last = k + 1;
        }
        x *= lambda;
    }
    Ok(last)
}

pub fn sample_t_rho_bar<R: Rng + ?Sized>(lambda: f64, p: f64, rng: &mut R) -> Result<u64> {
    t_rho_bar_from_uniforms(lambda, p, || rng.random::<f64>())
}

/// Counts `U_k < lambda^k p` over the sampling horizon; its mean is
/// `p (1 - lambda^K) / (1 - lambda)`.
pub fn sample_acceptance_count<R: Rng + ?Sized>(lambda: f64, p: f64, rng: &mut R) -> Result<u64> {
    let k_max = sampling_horizon(lambda, p)?;
    let mut n = 0;
    let mut x = p;
    for _ in 0..k_max {
        if rng.random::<f64>() < x {
            n += 1;
        }
        x *= lambda;
    }
    Ok(n)
}
