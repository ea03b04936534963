//! Conditioned lattice walks.
//!
//! Two rows of `2N` slots, each filled with `N` blue and `N` white balls,
//! give a pair of independent simple-walk bridges `X_m`, `Y_m`. The event
//! `D_{s_0..s_j}` asks that `X` and `Y` agree at every checkpoint
//! `t_r = s_0 + ... + s_r`; summing its probability over all compositions of
//! `2N` recovers `A(N, j) / binom(2N, N)^2`. The rest of the module holds the
//! exact one- and two-dimensional return probabilities used to bound that
//! event, and grid scans that fit the constants in those bounds.

use std::collections::HashMap;
use std::io::{self, Write};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{budget, domain, Result};
use crate::exact::{binomial, ratio, ratio_to_f64, ExactRatio};
use crate::moments::{a_exact, for_each_composition};
use crate::rng::RandomStream;

/// Largest `N` accepted by [`bridge_event_prob_exact`].
pub const BRIDGE_EXACT_BUDGET: usize = 4096;
/// Largest `2N` accepted by [`bridge_event_prob_enum`].
pub const BRIDGE_ENUM_MAX_STEPS: usize = 14;
/// Largest number of compositions summed by [`identity_4_2`].
pub const IDENTITY_COMPOSITION_BUDGET: u64 = 1_000_000;
/// Largest walk length for the exact two-dimensional tables.
pub const WALK2D_MAX_STEPS: usize = 600;

/// Block lengths `s_0, ..., s_j` of a composition of `2N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BridgeSpec {
    n: usize,
    s: Vec<usize>,
}

impl BridgeSpec {
    pub fn new(n: usize, s: Vec<usize>) -> Result<Self> {
        if n < 1 {
            return Err(domain("bridge half-length N must be at least 1"));
        }
        if s.len() < 2 {
            return Err(domain(format!("need at least two blocks (j >= 1), got {}", s.len())));
        }
        let total: usize = s.iter().sum();
        if total != 2 * n {
            return Err(domain(format!("blocks {s:?} sum to {total}, expected 2N = {}", 2 * n)));
        }
        Ok(Self { n, s })
    }

    pub fn half_length(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[usize] {
        &self.s
    }

    pub fn j(&self) -> usize {
        self.s.len() - 1
    }

    /// `t_r = s_0 + ... + s_r`; the last entry is always `2N`.
    pub fn checkpoints(&self) -> Vec<usize> {
        self.s
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }
}

/// Two ball rows read as walks: `x[m]`, `y[m]` are the positions after `m` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    x: Vec<i64>,
    y: Vec<i64>,
}

impl WalkPath {
    /// Builds both walks from their blue-ball masks (`true` = blue = up-step).
    pub fn from_rows(first: &[bool], second: &[bool]) -> Self {
        let walk = |row: &[bool]| {
            let mut pos = Vec::with_capacity(row.len() + 1);
            pos.push(0i64);
            let mut cur = 0i64;
            for &blue in row {
                cur += if blue { 1 } else { -1 };
                pos.push(cur);
            }
            pos
        };
        Self { x: walk(first), y: walk(second) }
    }

    /// Uniform pair of ball arrangements with `n` blue balls out of `2n` per row.
    pub fn sample_bridge(n: usize, rng: &mut RandomStream) -> Self {
        let mut row = || {
            let mut blue = vec![false; 2 * n];
            for i in rand::seq::index::sample(rng, 2 * n, n) {
                blue[i] = true;
            }
            blue
        };
        let first = row();
        let second = row();
        Self::from_rows(&first, &second)
    }

    pub fn steps(&self) -> usize {
        self.x.len() - 1
    }

    pub fn x(&self, m: usize) -> i64 {
        self.x[m]
    }

    pub fn y(&self, m: usize) -> i64 {
        self.y[m]
    }

    /// `U_m = (X_m + Y_m) / 2`.
    pub fn u(&self, m: usize) -> i64 {
        (self.x[m] + self.y[m]) / 2
    }

    /// `V_m = (X_m - Y_m) / 2`.
    pub fn v(&self, m: usize) -> i64 {
        (self.x[m] - self.y[m]) / 2
    }

    pub fn in_event(&self, spec: &BridgeSpec) -> bool {
        spec.checkpoints().into_iter().all(|t| self.x[t] == self.y[t])
    }
}

/// Coefficient of `z^n` in `prod_r sum_l binom(s_r, l)^2 z^l`.
fn bridge_weight(n: usize, blocks: &[usize]) -> BigUint {
    let mut poly = vec![BigUint::zero(); n + 1];
    poly[0] = BigUint::one();
    for &s in blocks {
        let factor: Vec<BigUint> = (0..=s.min(n))
            .map(|l| {
                let b = binomial(s as u64, l as u64);
                &b * &b
            })
            .collect();
        let mut next = vec![BigUint::zero(); n + 1];
        for (d, c) in poly.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (l, f) in factor.iter().enumerate().take(n + 1 - d) {
                next[d + l] += c * f;
            }
        }
        poly = next;
    }
    poly.swap_remove(n)
}

fn bridge_normalizer(n: usize) -> BigUint {
    let b = binomial(2 * n as u64, n as u64);
    &b * &b
}

/// `P(D_{s_0..s_j}) = binom(2N,N)^{-2} sum_{sum l_r = N, l_r <= s_r} prod_r binom(s_r, l_r)^2`.
pub fn bridge_event_prob_exact(spec: &BridgeSpec) -> Result<ExactRatio> {
    if spec.n > BRIDGE_EXACT_BUDGET {
        return Err(budget("bridge half-length", spec.n as u128, BRIDGE_EXACT_BUDGET as u128));
    }
    Ok(ratio(bridge_weight(spec.n, &spec.s), bridge_normalizer(spec.n)))
}

/// Same probability by enumerating every pair of ball arrangements.
///
/// Arrangements are grouped by their checkpoint heights; the number of
/// agreeing pairs is then the sum of squared group sizes.
pub fn bridge_event_prob_enum(spec: &BridgeSpec) -> Result<ExactRatio> {
    let steps = 2 * spec.n;
    if steps > BRIDGE_ENUM_MAX_STEPS {
        return Err(budget("enumerated bridge length", steps as u128, BRIDGE_ENUM_MAX_STEPS as u128));
    }
    let checkpoints = spec.checkpoints();
    let mut groups: HashMap<Vec<i64>, u64> = HashMap::new();
    let mut total = 0u64;
    for mask in 0u32..(1u32 << steps) {
        if mask.count_ones() as usize != spec.n {
            continue;
        }
        total += 1;
        let heights = checkpoints
            .iter()
            .map(|&t| {
                let blue = (mask & ((1u32 << t) - 1)).count_ones() as i64;
                2 * blue - t as i64
            })
            .collect();
        *groups.entry(heights).or_default() += 1;
    }
    let agreeing: u64 = groups.values().map(|c| c * c).sum();
    Ok(ratio(BigUint::from(agreeing), BigUint::from(total * total)))
}

/// Both sides of `sum_s P(D_s) = A(N, j) / binom(2N, N)^2`.
pub fn identity_4_2(n: usize, j: usize) -> Result<(ExactRatio, ExactRatio)> {
    if j < 1 {
        return Err(domain("identity needs j >= 1"));
    }
    let compositions = binomial((2 * n + j) as u64, j as u64);
    if compositions > BigUint::from(IDENTITY_COMPOSITION_BUDGET) {
        return Err(budget(
            "compositions of 2N",
            compositions.to_u128().unwrap_or(u128::MAX),
            IDENTITY_COMPOSITION_BUDGET,
        ));
    }
    let mut weight = BigUint::zero();
    for_each_composition(2 * n, j + 1, |s| weight += bridge_weight(n, s));
    let norm = bridge_normalizer(n);
    let lhs = ratio(weight, norm.clone());
    let rhs = ratio(a_exact(n, j)?, norm);
    Ok((lhs, rhs))
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl McEstimate {
    pub(crate) fn from_sums(sum: f64, sum_sq: f64, samples: u64) -> Self {
        let m = samples as f64;
        let mean = sum / m;
        let stderr = if samples > 1 {
            let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Self { estimate: mean, stderr, samples }
    }
}

pub fn bridge_event_prob_mc(spec: &BridgeSpec, samples: u64, rng: &mut RandomStream) -> Result<McEstimate> {
    if samples < 1 {
        return Err(domain("need at least one sample"));
    }
    let mut hits = 0u64;
    for _ in 0..samples {
        if WalkPath::sample_bridge(spec.n, rng).in_event(spec) {
            hits += 1;
        }
    }
    let h = hits as f64;
    Ok(McEstimate::from_sums(h, h, samples))
}

/// `P(Z_n = 0 | Z_0 = 0)` for the lazy walk (steps -1, 0, +1 with probabilities 1/4, 1/2, 1/4):
/// `2^{-n} sum_i 4^{-i} binom(2i, i) binom(n, 2i)`.
pub fn lazy_return_prob(n: usize) -> ExactRatio {
    let half = n / 2;
    // Common denominator 2^{n + 2 half}; term i carries 4^{half - i}.
    let mut central = BigUint::one();
    let mut choose = BigUint::one();
    let mut sum = BigUint::zero();
    for i in 0..=half {
        sum += (&central * &choose) << (2 * (half - i));
        let (iu, nu) = (i as u64, n as u64);
        central = central * ((2 * iu + 1) * (2 * iu + 2)) / ((iu + 1) * (iu + 1));
        if 2 * iu + 2 <= nu {
            choose = choose * ((nu - 2 * iu) * (nu - 2 * iu - 1)) / ((2 * iu + 1) * (2 * iu + 2));
        }
    }
    ratio(sum, BigUint::one() << (n + 2 * half))
}

/// Full law of the lazy walk after `n` steps; entry `x + n` is `P(Z_n = x)`.
pub fn lazy_distribution(n: usize) -> Vec<ExactRatio> {
    let mut counts = vec![BigUint::one()];
    for _ in 0..n {
        let width = counts.len() + 2;
        let mut next = vec![BigUint::zero(); width];
        for (i, c) in counts.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c << 1;
            next[i + 2] += c;
        }
        counts = next;
    }
    let den = BigUint::one() << (2 * n);
    counts.into_iter().map(|c| ratio(c, den.clone())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

/// `sqrt(n + 1) * P(Z_n = 0)` for `n = 1..=n_max`.
pub fn lemma4_sequence(n_max: usize) -> Vec<f64> {
    (1..=n_max)
        .into_par_iter()
        .map(|n| ((n + 1) as f64).sqrt() * ratio_to_f64(&lazy_return_prob(n)))
        .collect()
}

/// Range of `sqrt(n + 1) * P(Z_n = 0)` over `1 <= n <= n_max`.
pub fn lemma4_band(n_max: usize) -> Result<Band> {
    if n_max < 1 {
        return Err(domain("n_max must be at least 1"));
    }
    let seq = lemma4_sequence(n_max);
    let lo = seq.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = seq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Band { lo, hi })
}

/// `P(Z_n = 0 | Z_0 = a)` for the simple symmetric walk.
pub fn walk1d_prob(n: usize, a: i64) -> ExactRatio {
    let reach = a.unsigned_abs() as usize;
    if reach > n || (n + reach) % 2 == 1 {
        return BigRational::zero();
    }
    ratio(binomial(n as u64, ((n + reach) / 2) as u64), BigUint::one() << n)
}

/// Exact counts for the simple 2D walk from the origin, restricted to the horizontal axis.
///
/// Built by repeated convolution with the four-neighbour kernel. Only the
/// quadrant `x, y >= 0` is stored since the law is symmetric in both axes.
#[derive(Debug, Clone)]
pub struct Walk2dTable {
    axis: Vec<Vec<BigUint>>,
}

impl Walk2dTable {
    pub fn build(n_max: usize) -> Result<Self> {
        if n_max > WALK2D_MAX_STEPS {
            return Err(budget("2D walk length", n_max as u128, WALK2D_MAX_STEPS as u128));
        }
        let side = n_max + 2;
        let mut cur = vec![BigUint::zero(); side * side];
        cur[0] = BigUint::one();
        let mut axis = Vec::with_capacity(n_max + 1);
        axis.push(vec![BigUint::one()]);
        let at = |grid: &[BigUint], x: i64, y: i64| -> BigUint {
            grid[x.unsigned_abs() as usize * side + y.unsigned_abs() as usize].clone()
        };
        for m in 1..=n_max {
            let mut next = vec![BigUint::zero(); side * side];
            next.par_chunks_mut(side).enumerate().take(m + 1).for_each(|(x, row)| {
                for y in 0..=(m - x) {
                    if (x + y + m) % 2 == 1 {
                        continue;
                    }
                    let (xi, yi) = (x as i64, y as i64);
                    row[y] = at(&cur, xi - 1, yi)
                        + at(&cur, xi + 1, yi)
                        + at(&cur, xi, yi - 1)
                        + at(&cur, xi, yi + 1);
                }
            });
            cur = next;
            axis.push((0..=m).map(|x| cur[x * side].clone()).collect());
        }
        Ok(Self { axis })
    }

    pub fn n_max(&self) -> usize {
        self.axis.len() - 1
    }

    /// `P((X_n, Y_n) = (0, 0) | start (a, 0))`.
    pub fn prob(&self, n: usize, a: i64) -> ExactRatio {
        let reach = a.unsigned_abs() as usize;
        match self.axis.get(n).and_then(|row| row.get(reach)) {
            Some(c) => ratio(c.clone(), BigUint::one() << (2 * n)),
            None => BigRational::zero(),
        }
    }
}

pub fn walk2d_prob(n: usize, a: i64) -> Result<ExactRatio> {
    Ok(Walk2dTable::build(n)?.prob(n, a))
}

/// Which inequality a grid cell checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeCheck {
    /// `P <= C/sqrt(n) exp(-a^2/(2n))` for the 1D walk.
    Upper1d,
    /// `P(2n, 2a) >= c/sqrt(n) exp(-a^2/n)` for the 1D walk.
    Lower1d,
    /// `P <= c_1/n exp(-c_2 a^2/n)` for the 2D walk.
    Upper2d,
    /// `P(2n, 2a) >= c_{L,1}/n exp(-c_{L,2} a^2/n)` for the 2D walk.
    Lower2d,
}

impl EnvelopeCheck {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Upper1d => "upper-1d",
            Self::Lower1d => "lower-1d",
            Self::Upper2d => "upper-2d",
            Self::Lower2d => "lower-2d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCell {
    pub check: EnvelopeCheck,
    /// Time index as it appears in the bound (the walk runs `2n` steps for lower bounds).
    pub n: usize,
    pub a: i64,
    #[serde(with = "crate::moments::ratio_serde")]
    pub exact: ExactRatio,
    /// Envelope with the fitted constant.
    pub envelope: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// Fitted multiplicative constant per check, in the order the checks were run.
    pub fitted: Vec<(EnvelopeCheck, f64)>,
    /// `min n P((X_{2n}, Y_{2n}) = 0 | 0)` when the 2D lower grid was run.
    pub diagonal_return: Option<f64>,
    pub violations: usize,
    pub cells: Vec<EnvelopeCell>,
}

impl EnvelopeReport {
    pub fn constant(&self, check: EnvelopeCheck) -> Option<f64> {
        self.fitted.iter().find(|(c, _)| *c == check).map(|(_, v)| *v)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{ENVELOPE_HEADER}")?;
        for cell in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{:e},{}",
                cell.check.as_str(),
                cell.n,
                cell.a,
                cell.exact.numer(),
                cell.exact.denom(),
                cell.envelope,
                cell.ok
            )?;
        }
        Ok(())
    }
}

pub const ENVELOPE_HEADER: &str = "check,n,a,exact_num,exact_den,envelope,ok";

/// Raw cell before fitting: `scaled = P / shape`, so the bound reads `scaled <= C` or `>= c`.
struct RawCell {
    n: usize,
    a: i64,
    exact: ExactRatio,
    shape: f64,
}

fn fit(check: EnvelopeCheck, raw: Vec<RawCell>, upper: bool) -> (f64, usize, Vec<EnvelopeCell>) {
    let scaled: Vec<f64> = raw.iter().map(|c| ratio_to_f64(&c.exact) / c.shape).collect();
    let bad = |s: f64| !(s.is_finite() && s > 0.0);
    let violations = scaled.iter().filter(|&&s| bad(s)).count();
    let good = scaled.iter().copied().filter(|&s| !bad(s));
    let constant = if upper {
        good.fold(0.0, f64::max)
    } else {
        good.fold(f64::INFINITY, f64::min)
    };
    let cells = raw
        .into_iter()
        .zip(scaled)
        .map(|(c, s)| EnvelopeCell {
            check,
            n: c.n,
            a: c.a,
            envelope: constant * c.shape,
            ok: !bad(s),
            exact: c.exact,
        })
        .collect();
    (constant, violations, cells)
}

/// Fits the constants of the one-dimensional local-limit envelopes.
///
/// Upper cells: `1 <= n <= n_max`, `|a| <= 2 sqrt(n)`, `n + a` even. Unreachable
/// starting points (`|a| > n`) are skipped like the odd-parity ones.
/// Lower cells: `1 <= n <= n_max / 2`, `|a| <= L sqrt(n)`, walk of `2n` steps from `2a`.
pub fn lemma5_envelopes(n_max: usize, l: f64) -> Result<EnvelopeReport> {
    if n_max < 2 || !(l > 0.0) {
        return Err(domain("need n_max >= 2 and L > 0"));
    }
    let mut upper = Vec::new();
    for n in 1..=n_max {
        let reach = (2.0 * (n as f64).sqrt()).floor() as i64;
        for a in -reach..=reach {
            if (n as i64 + a) % 2 != 0 || a.unsigned_abs() as usize > n {
                continue;
            }
            let nf = n as f64;
            let shape = (-(a * a) as f64 / (2.0 * nf)).exp() / nf.sqrt();
            upper.push(RawCell { n, a, exact: walk1d_prob(n, a), shape });
        }
    }
    let mut lower = Vec::new();
    for n in 1..=n_max / 2 {
        let reach = (l * (n as f64).sqrt()).floor() as i64;
        for a in -reach..=reach {
            if a.unsigned_abs() as usize > n {
                continue;
            }
            let nf = n as f64;
            let shape = (-(a * a) as f64 / nf).exp() / nf.sqrt();
            lower.push(RawCell { n, a, exact: walk1d_prob(2 * n, 2 * a), shape });
        }
    }
    let (c_up, v_up, mut cells) = fit(EnvelopeCheck::Upper1d, upper, true);
    let (c_lo, v_lo, lower_cells) = fit(EnvelopeCheck::Lower1d, lower, false);
    cells.extend(lower_cells);
    Ok(EnvelopeReport {
        fitted: vec![(EnvelopeCheck::Upper1d, c_up), (EnvelopeCheck::Lower1d, c_lo)],
        diagonal_return: None,
        violations: v_up + v_lo,
        cells,
    })
}

/// Fits the constants of the two-dimensional return-probability envelopes.
///
/// Upper cells: `1 <= n <= n_max`, `|a| <= L sqrt(n)`, `n + a` even, with decay rate `c2`.
/// Lower cells: `1 <= n <= n_max / 2`, `|a| <= L sqrt(n)`, walk of `2n` steps from
/// `(2a, 0)`, with decay rate `c_l2`. The `a = 0` lower column is the diagonal
/// return bound `P(2n, 0) >= c_3 / n`.
pub fn lemma6_8_envelopes(n_max: usize, l: f64, c2: f64, c_l2: f64) -> Result<EnvelopeReport> {
    if n_max < 2 || n_max > WALK2D_MAX_STEPS {
        return Err(budget("2D walk length", n_max as u128, WALK2D_MAX_STEPS as u128));
    }
    if !(l > 0.0 && c2 > 0.0 && c_l2 > 0.0) {
        return Err(domain("L, c2 and c_l2 must be positive"));
    }
    let table = Walk2dTable::build(n_max)?;
    let mut upper = Vec::new();
    for n in 1..=n_max {
        let reach = (l * (n as f64).sqrt()).floor() as i64;
        for a in -reach..=reach {
            if (n as i64 + a) % 2 != 0 || a.unsigned_abs() as usize > n {
                continue;
            }
            let nf = n as f64;
            let shape = (-c2 * (a * a) as f64 / nf).exp() / nf;
            upper.push(RawCell { n, a, exact: table.prob(n, a), shape });
        }
    }
    let mut lower = Vec::new();
    for n in 1..=n_max / 2 {
        let reach = (l * (n as f64).sqrt()).floor() as i64;
        for a in -reach..=reach {
            if a.unsigned_abs() as usize > n {
                continue;
            }
            let nf = n as f64;
            let shape = (-c_l2 * (a * a) as f64 / nf).exp() / nf;
            lower.push(RawCell { n, a, exact: table.prob(2 * n, 2 * a), shape });
        }
    }
    let diagonal = lower
        .iter()
        .filter(|c| c.a == 0)
        .map(|c| ratio_to_f64(&c.exact) * c.n as f64)
        .fold(f64::INFINITY, f64::min);
    let (c1, v_up, mut cells) = fit(EnvelopeCheck::Upper2d, upper, true);
    let (c_l1, v_lo, lower_cells) = fit(EnvelopeCheck::Lower2d, lower, false);
    cells.extend(lower_cells);
    Ok(EnvelopeReport {
        fitted: vec![(EnvelopeCheck::Upper2d, c1), (EnvelopeCheck::Lower2d, c_l1)],
        diagonal_return: Some(diagonal),
        violations: v_up + v_lo,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> ExactRatio {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn spec(n: usize, s: &[usize]) -> BridgeSpec {
        BridgeSpec::new(n, s.to_vec()).unwrap()
    }

    #[test]
    fn bridge_spec_validation() {
        assert!(BridgeSpec::new(0, vec![0, 0]).is_err());
        assert!(BridgeSpec::new(2, vec![4]).is_err());
        assert!(BridgeSpec::new(2, vec![1, 2]).is_err());
        assert_eq!(spec(3, &[1, 0, 5]).checkpoints(), vec![1, 1, 6]);
    }

    #[test]
    fn bridge_examples() {
        assert_eq!(bridge_event_prob_exact(&spec(1, &[1, 1])).unwrap(), q(1, 2));
        assert_eq!(bridge_event_prob_exact(&spec(1, &[2, 0])).unwrap(), q(1, 1));
        assert_eq!(bridge_event_prob_exact(&spec(2, &[2, 2])).unwrap(), q(1, 2));
        assert_eq!(bridge_event_prob_enum(&spec(1, &[1, 1])).unwrap(), q(1, 2));
        assert_eq!(bridge_event_prob_enum(&spec(2, &[1, 3])).unwrap(), q(1, 2));
        assert_eq!(bridge_event_prob_enum(&spec(3, &[0, 6, 0])).unwrap(), q(1, 1));
        assert!(bridge_event_prob_enum(&spec(8, &[8, 8])).is_err());
    }

    #[test]
    fn identity_examples() {
        assert_eq!(identity_4_2(1, 1).unwrap(), (q(5, 2), q(5, 2)));
        assert_eq!(identity_4_2(2, 1).unwrap(), (q(7, 2), q(7, 2)));
        assert_eq!(identity_4_2(0, 3).unwrap(), (q(1, 1), q(1, 1)));
        assert!(identity_4_2(2, 0).is_err());
    }

    #[test]
    fn lazy_return_examples() {
        assert_eq!(lazy_return_prob(0), q(1, 1));
        assert_eq!(lazy_return_prob(1), q(1, 2));
        assert_eq!(lazy_return_prob(2), q(3, 8));
    }

    #[test]
    fn lazy_return_matches_distribution_recursion() {
        let mut prev = lazy_distribution(0);
        for n in 0..60 {
            let dist = lazy_distribution(n + 1);
            let total: ExactRatio = dist.iter().cloned().sum();
            assert_eq!(total, q(1, 1));
            assert_eq!(dist[n + 1], lazy_return_prob(n + 1));
            let side = |i: usize| prev.get(i).cloned().unwrap_or_else(|| q(0, 1));
            let step = side(n) * q(1, 2)
                + if n > 0 { (side(n - 1) + side(n + 1)) * q(1, 4) } else { q(0, 1) };
            assert_eq!(dist[n + 1], step);
            assert!(lazy_return_prob(n + 1) <= lazy_return_prob(n));
            prev = dist;
        }
    }

    #[test]
    fn lemma4_first_value() {
        let seq = lemma4_sequence(3);
        assert!((seq[0] - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn walk1d_examples() {
        assert_eq!(walk1d_prob(2, 0), q(1, 2));
        assert_eq!(walk1d_prob(3, 0), q(0, 1));
        assert_eq!(walk1d_prob(3, 5), q(0, 1));
        assert_eq!(walk1d_prob(3, -1), q(3, 8));
        assert_eq!(walk1d_prob(0, 0), q(1, 1));
    }

    #[test]
    fn walk2d_examples() {
        assert_eq!(walk2d_prob(2, 0).unwrap(), q(1, 4));
        assert_eq!(walk2d_prob(1, 0).unwrap(), q(0, 1));
        assert_eq!(walk2d_prob(1, 1).unwrap(), q(1, 4));
        assert!(walk2d_prob(601, 0).is_err());
    }

    #[test]
    fn walk2d_parity_and_rotation() {
        let table = Walk2dTable::build(40).unwrap();
        for n in 0..=40usize {
            for a in -(n as i64 + 2)..=(n as i64 + 2) {
                let p = table.prob(n, a);
                if (n as i64 + a) % 2 != 0 {
                    assert!(p.is_zero());
                }
                // Rotating by 45 degrees splits the walk into two independent 1D walks.
                let one = walk1d_prob(n, a);
                assert_eq!(p, &one * &one, "n={n} a={a}");
            }
        }
    }

    #[test]
    fn walk_path_rotation() {
        let path = WalkPath::from_rows(&[true, false, true, false], &[false, false, true, true]);
        assert_eq!(path.steps(), 4);
        assert_eq!((path.x(1), path.y(1)), (1, -1));
        assert_eq!((path.u(1), path.v(1)), (0, 1));
        assert_eq!((path.u(4), path.v(4)), (0, 0));
    }

    #[test]
    fn mc_single_block_is_certain() {
        let mut rng = RandomStream::from_seed(11);
        let est = bridge_event_prob_mc(&spec(3, &[6, 0]), 500, &mut rng).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mc_examples() {
        let mut rng = RandomStream::from_seed(12);
        let est = bridge_event_prob_mc(&spec(1, &[1, 1]), 100_000, &mut rng).unwrap();
        assert!((est.estimate - 0.5).abs() < 0.005);
        let est = bridge_event_prob_mc(&spec(2, &[2, 2]), 100_000, &mut rng).unwrap();
        assert!((est.estimate - 0.5).abs() < 0.005);
    }

    #[test]
    fn lemma5_envelope_fit() {
        let report = lemma5_envelopes(500, 1.0).unwrap();
        assert_eq!(report.violations, 0);
        let c0 = report.constant(EnvelopeCheck::Upper1d).unwrap();
        let cl = report.constant(EnvelopeCheck::Lower1d).unwrap();
        assert!(c0.is_finite() && c0 > 0.0 && cl > 0.0);
        for cell in &report.cells {
            let p = ratio_to_f64(&cell.exact);
            match cell.check {
                EnvelopeCheck::Upper1d => assert!(p <= cell.envelope * (1.0 + 1e-12)),
                _ => assert!(p >= cell.envelope * (1.0 - 1e-12)),
            }
        }
    }

    #[test]
    fn lemma6_8_envelope_fit() {
        let report = lemma6_8_envelopes(200, 1.0, 0.25, 2.0).unwrap();
        assert_eq!(report.violations, 0);
        let c1 = report.constant(EnvelopeCheck::Upper2d).unwrap();
        let c3 = report.diagonal_return.unwrap();
        assert!(c1.is_finite() && c1 > 0.0);
        assert!(c3 > 0.0);
        // Odd-parity cells never enter the upper grid.
        assert!(report
            .cells
            .iter()
            .filter(|c| c.check == EnvelopeCheck::Upper2d)
            .all(|c| (c.n as i64 + c.a) % 2 == 0 && !c.exact.is_zero()));
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(ENVELOPE_HEADER));
    }
}
