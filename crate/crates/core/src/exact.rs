//! Exact integer and rational foundations.
//!
//! Every exact quantity in the crate is either a [`BigCount`] (nonnegative
//! arbitrary-precision integer) or an [`ExactRatio`] (a rational kept in
//! lowest terms with a positive denominator). Floating point only appears
//! in log-space asymptotics and display conversions.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, Result};

pub type BigCount = BigUint;

/// Rational in lowest terms; `num_rational` reduces on every construction.
pub type ExactRatio = BigRational;

/// Factorials `0! ..= FACTORIAL_CAP!` are tabulated once and shared.
pub const FACTORIAL_CAP: usize = 512;

fn factorial_table() -> &'static [BigUint] {
    static TABLE: OnceLock<Vec<BigUint>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(FACTORIAL_CAP + 1);
        let mut acc = BigUint::one();
        table.push(acc.clone());
        for i in 1..=FACTORIAL_CAP {
            acc *= i as u64;
            table.push(acc.clone());
        }
        table
    })
}

pub fn factorial(n: u64) -> BigCount {
    let table = factorial_table();
    if (n as usize) <= FACTORIAL_CAP {
        return table[n as usize].clone();
    }
    let mut acc = table[FACTORIAL_CAP].clone();
    for i in (FACTORIAL_CAP as u64 + 1)..=n {
        acc *= i;
    }
    acc
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigCount {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    if (n as usize) <= FACTORIAL_CAP {
        let table = factorial_table();
        return &table[n as usize] / (&table[k as usize] * &table[(n - k) as usize]);
    }
    // Each partial product is itself a binomial coefficient, so the division is exact.
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn ratio(num: BigUint, den: BigUint) -> ExactRatio {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_from_int(value: BigUint) -> ExactRatio {
    BigRational::from_integer(BigInt::from(value))
}

/// `E Z_{n,k} = binom(n,k) / k!`.
pub fn expected_count(n: u64, k: u64) -> Result<ExactRatio> {
    if k < 1 || k > n {
        return Err(domain(format!("expected_count needs 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(ratio(binomial(n, k), factorial(k)))
}

/// Natural log of the Stirling approximation to `E Z_{n,k}` with
/// `k = ceil(c n^l)`.
///
/// The approximation is `[(e/c)^2 n^(1-2l)]^(c n^l) / (2 pi c n^l)`, with an
/// extra `exp(-c^2/2)` when `l = 1/2`. It is evaluated at the integerized
/// `k`, i.e. with `c n^l` replaced by `k` throughout.
pub fn asymptotic_expected_count_log(c: f64, l: f64, n: u64) -> Result<f64> {
    if !(l > 0.0 && l <= 0.5) {
        return Err(domain(format!("exponent l must lie in (0, 1/2], got {l}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(domain(format!("scale c must be positive, got {c}")));
    }
    if n < 1 {
        return Err(domain("n must be at least 1"));
    }
    let nf = n as f64;
    let k = (c * nf.powf(l)).ceil();
    let mut log = -(2.0 * std::f64::consts::PI * k).ln() + k * (2.0 + nf.ln() - 2.0 * k.ln());
    if l == 0.5 {
        let c_eff = k / nf.sqrt();
        log -= c_eff * c_eff / 2.0;
    }
    Ok(log)
}

/// `ln Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Natural log of a positive big integer, accurate for values far beyond `f64` range.
pub fn ln_big(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 1000 {
        return value.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational.
pub fn ln_ratio(value: &ExactRatio) -> f64 {
    let num = value.numer().magnitude();
    let den = value.denom().magnitude();
    ln_big(num) - ln_big(den)
}

/// Nearest-ish `f64`; falls back to log space when the direct conversion overflows.
pub fn ratio_to_f64(value: &ExactRatio) -> f64 {
    if value.is_zero() {
        return 0.0;
    }
    match value.to_f64() {
        Some(v) if v.is_finite() && v != 0.0 => v,
        _ => {
            let sign = if value.numer().sign() == num_bigint::Sign::Minus { -1.0 } else { 1.0 };
            sign * ln_ratio(&value.abs()).exp()
        }
    }
}

/// `sum_{i=0}^{count-1} ln(top - i)`, i.e. the log of a falling factorial.
pub(crate) fn ln_falling(top: u64, count: u64) -> f64 {
    (0..count).map(|i| ((top - i) as f64).ln()).sum()
}

/// `(top)_count = top (top-1) ... (top-count+1)` exactly.
pub(crate) fn falling(top: u64, count: u64) -> BigUint {
    (0..count).fold(BigUint::one(), |acc, i| acc * (top - i))
}
