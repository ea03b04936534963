//! Exact second moments of `Z_{n,k}` and the overlap sums `A(N, j)`.
//!
//! `A(N, j)` is the `(N, N)` coefficient of the `(j+1)`-th power of the
//! bivariate series `sum_{l,m} binom(l+m, l)^2 x^l y^m`. Powers are formed by
//! truncated 2D convolution; every diagonal coefficient met on the way is
//! memoized, so a second-moment evaluation reuses all earlier work.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::{OnceLock, RwLock};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{budget, domain, Error, Result};
use crate::exact::{
    binomial, expected_count, factorial, falling, ln_big, ln_falling, log_gamma, ratio,
    ratio_from_int, ratio_to_f64, BigCount, ExactRatio,
};

/// Default ceiling on `max(N, j)` for [`a_exact`].
pub const A_BUDGET: usize = 128;

/// Largest `binom(N+j, j)^2` that [`a_bruteforce`] will enumerate.
pub const A_BRUTE_FORCE_CAP: u64 = 10_000_000;

/// Largest subsequence length [`variance_scan`] accepts without `force`.
pub const SCAN_K_BUDGET: usize = 64;

/// Kernel entry `binom(l + m, l)^2`.
fn kernel(l: usize, m: usize) -> BigUint {
    let b = binomial((l + m) as u64, l as u64);
    &b * &b
}

/// Symmetric square grid `[0, size)^2` of big integers.
#[derive(Clone)]
struct Grid {
    size: usize,
    cells: Vec<BigUint>,
}

impl Grid {
    fn kernel(size: usize) -> Self {
        let mut cells = Vec::with_capacity(size * size);
        for a in 0..size {
            for b in 0..size {
                cells.push(kernel(a, b));
            }
        }
        Self { size, cells }
    }

    fn at(&self, a: usize, b: usize) -> &BigUint {
        &self.cells[a * self.size + b]
    }

    /// `self * kernel`, truncated to `[0, size)^2`.
    fn times_kernel(&self, kern: &Grid, size: usize) -> Grid {
        debug_assert!(size <= self.size && size <= kern.size);
        let mut cells = vec![BigUint::zero(); size * size];
        let rows: Vec<(usize, Vec<BigUint>)> = (0..size)
            .into_par_iter()
            .map(|a| {
                // Powers of a symmetric kernel stay symmetric; fill b <= a only.
                let row = (0..=a)
                    .map(|b| {
                        let mut acc = BigUint::zero();
                        for l in 0..=a {
                            for m in 0..=b {
                                acc += self.at(a - l, b - m) * kern.at(l, m);
                            }
                        }
                        acc
                    })
                    .collect();
                (a, row)
            })
            .collect();
        for (a, row) in rows {
            for (b, v) in row.into_iter().enumerate() {
                if a != b {
                    cells[b * size + a] = v.clone();
                }
                cells[a * size + b] = v;
            }
        }
        Grid { size, cells }
    }
}

fn memo() -> &'static RwLock<HashMap<(usize, usize), BigUint>> {
    static MEMO: OnceLock<RwLock<HashMap<(usize, usize), BigUint>>> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memo_get(n: usize, j: usize) -> Option<BigUint> {
    memo().read().expect("A memo poisoned").get(&(n, j)).cloned()
}

fn memo_put(entries: impl IntoIterator<Item = ((usize, usize), BigUint)>) {
    let mut guard = memo().write().expect("A memo poisoned");
    for (key, value) in entries {
        guard.entry(key).or_insert(value);
    }
}

/// Exact table of `A(N, j)` for `N <= n_max`, `j <= j_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ATable {
    n_max: usize,
    j_max: usize,
    values: Vec<Vec<BigCount>>,
}

impl ATable {
    pub fn build(n_max: usize, j_max: usize) -> Self {
        let size = n_max + 1;
        let kern = Grid::kernel(size);
        let mut power = kern.clone();
        let mut values = Vec::with_capacity(j_max + 1);
        for j in 0..=j_max {
            if j > 0 {
                power = power.times_kernel(&kern, size);
            }
            values.push((0..size).map(|n| power.at(n, n).clone()).collect());
        }
        let table = Self { n_max, j_max, values };
        memo_put(table.entries());
        table
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn get(&self, n: usize, j: usize) -> Option<&BigCount> {
        self.values.get(j).and_then(|row| row.get(n))
    }

    fn entries(&self) -> impl Iterator<Item = ((usize, usize), BigUint)> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(j, row)| row.iter().enumerate().map(move |(n, v)| ((n, j), v.clone())))
    }
}

/// `A(N, j)` by generating-function convolution, with the default budget.
pub fn a_exact(n: usize, j: usize) -> Result<BigCount> {
    a_exact_with_budget(n, j, A_BUDGET)
}

pub fn a_exact_with_budget(n: usize, j: usize, limit: usize) -> Result<BigCount> {
    let largest = n.max(j);
    if largest > limit {
        return Err(budget("A(N, j) index", largest as u128, limit as u128));
    }
    if let Some(v) = memo_get(n, j) {
        return Ok(v);
    }
    let table = ATable::build(n, j);
    Ok(table.get(n, j).expect("table covers request").clone())
}

/// `A(k - j, j)` for `j = 0..=k`.
///
/// Step `j` of the convolution only needs the grid up to `k - j`, so the
/// working grid shrinks as the power grows.
fn a_antidiagonal(k: usize) -> Vec<BigCount> {
    if let Some(all) = (0..=k).map(|j| memo_get(k - j, j)).collect::<Option<Vec<_>>>() {
        return all;
    }
    let kern = Grid::kernel(k + 1);
    let mut power = kern.clone();
    let mut out = Vec::with_capacity(k + 1);
    out.push(power.at(k, k).clone());
    for j in 1..=k {
        let size = k - j + 1;
        power = power.times_kernel(&kern, size);
        out.push(power.at(k - j, k - j).clone());
    }
    memo_put(out.iter().enumerate().map(|(j, v)| ((k - j, j), v.clone())));
    out
}

/// Calls `visit` with every composition of `total` into `parts` nonnegative parts.
pub(crate) fn for_each_composition(total: usize, parts: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, left: usize, parts: usize, visit: &mut dyn FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            visit(buf);
            buf.pop();
            return;
        }
        for first in 0..=left {
            buf.push(first);
            rec(buf, left - first, parts, visit);
            buf.pop();
        }
    }
    if parts == 0 {
        if total == 0 {
            visit(&[]);
        }
        return;
    }
    rec(&mut Vec::with_capacity(parts), total, parts, &mut visit);
}

/// `A(N, j)` by literal double enumeration of `{l_r}` and `{m_r}`.
pub fn a_bruteforce(n: usize, j: usize) -> Result<BigCount> {
    let per_side = binomial((n + j) as u64, j as u64);
    let pairs = &per_side * &per_side;
    if pairs > BigUint::from(A_BRUTE_FORCE_CAP) {
        return Err(budget(
            "composition pairs",
            pairs.to_u128().unwrap_or(u128::MAX),
            A_BRUTE_FORCE_CAP,
        ));
    }
    let mut sides: Vec<Vec<usize>> = Vec::new();
    for_each_composition(n, j + 1, |c| sides.push(c.to_vec()));
    let mut total = BigUint::zero();
    for l in &sides {
        for m in &sides {
            let term = l
                .iter()
                .zip(m)
                .fold(BigUint::one(), |acc, (&a, &b)| acc * kernel(a, b));
            total += term;
        }
    }
    Ok(total)
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// `E Z_{n,k}^2 = sum_j binom(n, 2k-j) A(k-j, j) / (2k-j)!`.
pub fn second_moment(n: usize, k: usize) -> Result<ExactRatio> {
    second_moment_with_budget(n, k, A_BUDGET)
}

pub fn second_moment_with_budget(n: usize, k: usize, limit: usize) -> Result<ExactRatio> {
    check_nk(n, k)?;
    if k > limit {
        return Err(budget("A(N, j) index", k as u128, limit as u128));
    }
    let overlaps = a_antidiagonal(k);
    let mut total = BigRational::zero();
    for (j, a) in overlaps.iter().enumerate() {
        let span = (2 * k - j) as u64;
        if span > n as u64 {
            continue;
        }
        total += ratio(binomial(n as u64, span) * a, factorial(span));
    }
    Ok(total)
}

/// The `j`-th summand of [`second_moment`].
pub fn second_moment_term(n: usize, k: usize, j: usize) -> Result<ExactRatio> {
    check_nk(n, k)?;
    if j > k {
        return Err(domain(format!("overlap j={j} exceeds k={k}")));
    }
    let span = (2 * k - j) as u64;
    let a = a_exact(k - j, j)?;
    Ok(ratio(binomial(n as u64, span) * a, factorial(span)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub k: usize,
    #[serde(with = "ratio_serde")]
    pub first: ExactRatio,
    #[serde(with = "ratio_serde")]
    pub second: ExactRatio,
    #[serde(with = "ratio_serde")]
    pub variance: ExactRatio,
    /// `Var / (E Z)^2`.
    #[serde(with = "ratio_serde")]
    pub ratio: ExactRatio,
}

pub(crate) mod ratio_serde {
    use super::ExactRatio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &ExactRatio, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ExactRatio, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub fn moment_summary(n: usize, k: usize) -> Result<MomentSummary> {
    moment_summary_with_budget(n, k, A_BUDGET)
}

pub fn moment_summary_with_budget(n: usize, k: usize, limit: usize) -> Result<MomentSummary> {
    let first = expected_count(n as u64, k as u64)?;
    let second = second_moment_with_budget(n, k, limit)?;
    let variance = &second - &first * &first;
    if variance.is_negative() {
        return Err(Error::Inconsistent(format!(
            "negative variance {variance} at n={n}, k={k}"
        )));
    }
    let ratio = &variance / (&first * &first);
    Ok(MomentSummary { n, k, first, second, variance, ratio })
}

fn check_bkj(n: usize, k: usize, j: usize) -> Result<()> {
    if j < 1 || j > k || 2 * k - j > n {
        return Err(domain(format!(
            "need 1 <= j <= k and 2k - j <= n, got n={n}, k={k}, j={j}"
        )));
    }
    Ok(())
}

/// `((n-k)!)^2 / (n! (n-2k+j)!)` exactly.
pub fn factorial_prefactor(n: usize, k: usize, j: usize) -> Result<ExactRatio> {
    check_bkj(n, k, j)?;
    let (n, k, j) = (n as u64, k as u64, j as u64);
    Ok(ratio(falling(n - k, k - j), falling(n, k)))
}

/// Rational part of `B(n, k, j)`, i.e. everything except `(2k)^{j/2}`.
pub fn b_term_rational(n: usize, k: usize, j: usize) -> Result<ExactRatio> {
    let pre = factorial_prefactor(n, k, j)?;
    let f = falling(2 * k as u64, j as u64);
    Ok(pre * ratio_from_int(&f * &f))
}

/// `B(n,k,j) = ((n-k)!)^2/(n!(n-2k+j)!) * ((2k)!/(2k-j)!)^2 * (2k)^{j/2}`, via logs.
pub fn b_term(n: usize, k: usize, j: usize) -> Result<f64> {
    check_bkj(n, k, j)?;
    let (nu, ku, ju) = (n as u64, k as u64, j as u64);
    let log = -ln_falling(nu, ku)
        + ln_falling(nu - ku, ku - ju)
        + 2.0 * ln_falling(2 * ku, ju)
        + 0.5 * j as f64 * ((2 * k) as f64).ln();
    Ok(log.exp())
}

/// Rational part of `C(n, k)`, everything except `(2k-2)^{1/2}`.
pub fn c_diagnostic_rational(n: usize, k: usize) -> Result<ExactRatio> {
    if k < 1 || 2 * k - 1 > n {
        return Err(domain(format!("need k >= 1 and 2k - 1 <= n, got n={n}, k={k}")));
    }
    let pre = factorial_prefactor(n, k, 1)?;
    let k4 = BigUint::from(k as u64).pow(4);
    let odd = BigUint::from((2 * k - 1) as u64);
    Ok(pre * ratio(k4, &odd * &odd))
}

/// `C(n,k) = ((n-k)!)^2/(n!(n-2k+1)!) * k^4 (2k-1)^{-2} (2k-2)^{1/2}`, via logs.
pub fn c_diagnostic(n: usize, k: usize) -> Result<f64> {
    if k < 1 || 2 * k - 1 > n {
        return Err(domain(format!("need k >= 1 and 2k - 1 <= n, got n={n}, k={k}")));
    }
    let (nu, ku) = (n as u64, k as u64);
    let kf = k as f64;
    let log = -ln_falling(nu, ku) + ln_falling(nu - ku, ku - 1) + 4.0 * kf.ln()
        - 2.0 * (2.0 * kf - 1.0).ln()
        + 0.5 * (2.0 * kf - 2.0).ln();
    Ok(log.exp())
}

/// `A(N,j) / [ j^{1/2} / Gamma((j+1)/2) * (2N)^{j/2} * binom(2N,N)^2 ]`.
pub fn lemma2_ratio(n: usize, j: usize) -> Result<f64> {
    if n < 1 || j < 1 {
        return Err(domain(format!("need N >= 1 and j >= 1, got N={n}, j={j}")));
    }
    let a = a_exact(n, j)?;
    let jf = j as f64;
    let envelope = 0.5 * jf.ln() - log_gamma((jf + 1.0) / 2.0)?
        + 0.5 * jf * ((2 * n) as f64).ln()
        + 2.0 * ln_big(&binomial(2 * n as u64, n as u64));
    Ok((ln_big(&a) - envelope).exp())
}

/// `A(k-1, 1) / ((2k-2)^{1/2} binom(2k-2, k-1)^2)`.
pub fn lemma3_ratio(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain(format!("need k >= 2, got {k}")));
    }
    let a = a_exact(k - 1, 1)?;
    let span = (2 * k - 2) as u64;
    let envelope = 0.5 * (span as f64).ln() + 2.0 * ln_big(&binomial(span, (k - 1) as u64));
    Ok((ln_big(&a) - envelope).exp())
}

/// `k = max(1, floor(n^exponent))`.
pub fn k_for_exponent(n: usize, exponent: f64) -> usize {
    // The tiny offset keeps exact powers such as 1000^(1/3) from rounding down.
    (((n as f64).powf(exponent) + 1e-9).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub summary: MomentSummary,
    pub ratio_float: f64,
    /// `ratio * n / k^{5/2}`.
    pub ratio_norm: f64,
}

pub fn variance_scan(exponent: f64, n_list: &[usize], force: bool) -> Result<Vec<ScanRow>> {
    if !(exponent > 0.0 && exponent < 0.5) {
        return Err(domain(format!("scan exponent must lie in (0, 0.5), got {exponent}")));
    }
    let ks: Vec<(usize, usize)> = n_list.iter().map(|&n| (n, k_for_exponent(n, exponent))).collect();
    let limit = if force { usize::MAX } else { SCAN_K_BUDGET };
    for &(n, k) in &ks {
        if n < 1 {
            return Err(domain("n must be at least 1"));
        }
        if k > limit {
            return Err(budget("scan subsequence length", k as u128, limit as u128));
        }
    }
    ks.par_iter()
        .map(|&(n, k)| {
            let summary = moment_summary_with_budget(n, k, usize::MAX)?;
            let ratio_float = ratio_to_f64(&summary.ratio);
            let ratio_norm = ratio_float * n as f64 / (k as f64).powf(2.5);
            Ok(ScanRow { summary, ratio_float, ratio_norm })
        })
        .collect()
}

pub const VARIANCE_SCAN_HEADER: &str =
    "n,k,first_num,first_den,second_num,second_den,var_num,var_den,ratio_float,ratio_norm_float";

pub fn write_variance_scan_csv(rows: &[ScanRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{VARIANCE_SCAN_HEADER}")?;
    for row in rows {
        let s = &row.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:e},{:e}",
            s.n,
            s.k,
            s.first.numer(),
            s.first.denom(),
            s.second.numer(),
            s.second.denom(),
            s.variance.numer(),
            s.variance.denom(),
            row.ratio_float,
            row.ratio_norm
        )?;
    }
    Ok(())
}
