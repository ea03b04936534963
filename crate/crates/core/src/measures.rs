//! The size-biased measure `mu_{n;k}`, its total-variation distance to the
//! uniform measure, and concentration probes for `Z / E Z`.
//!
//! `mu_{n;k}(s) = k! Z(s) / (binom(n, k) n!)`, so the density of `mu` with
//! respect to the uniform measure is `Z / E Z`. That identity turns the
//! total-variation distance into `E_U |Z / E Z - 1| / 2`, which is what the
//! Monte Carlo estimator samples.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{budget, domain, Result};
use crate::exact::{binomial, expected_count, factorial, ln_big, ln_ratio, ratio, BigCount, ExactRatio};
use crate::moments::k_for_exponent;
use crate::perm::{count_images, count_k_incseq, for_each_permutation, sample_uniform, Permutation};
use crate::rng::RandomStream;
use crate::walk::McEstimate;

/// Largest `n` for exhaustive enumeration of `S_n`.
pub const EXHAUSTIVE_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramSource {
    Exact,
    MonteCarlo { samples: u64 },
}

/// How many permutations attain each value of `Z_{n,k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZHistogram {
    pub n: usize,
    pub k: usize,
    pub counts: BTreeMap<BigCount, BigCount>,
    pub source: HistogramSource,
}

impl ZHistogram {
    pub fn total_mass(&self) -> BigCount {
        self.counts.values().sum()
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

fn check_exhaustive(n: usize) -> Result<()> {
    if n > EXHAUSTIVE_MAX_N {
        return Err(budget("exhaustive permutation size", n as u128, EXHAUSTIVE_MAX_N as u128));
    }
    Ok(())
}

pub fn z_histogram_exact(n: usize, k: usize) -> Result<ZHistogram> {
    check_nk(n, k)?;
    check_exhaustive(n)?;
    let mut counts: HashMap<u128, u64> = HashMap::new();
    for_each_permutation(n, |p| *counts.entry(count_images(p, k)).or_default() += 1);
    Ok(ZHistogram {
        n,
        k,
        counts: counts
            .into_iter()
            .map(|(z, c)| (BigUint::from(z), BigUint::from(c)))
            .collect(),
        source: HistogramSource::Exact,
    })
}

pub fn z_histogram_mc(n: usize, k: usize, samples: u64, rng: &mut RandomStream) -> Result<ZHistogram> {
    check_nk(n, k)?;
    let mut counts: BTreeMap<BigCount, BigCount> = BTreeMap::new();
    for _ in 0..samples {
        let z = count_k_incseq(&sample_uniform(n, rng), k)?;
        *counts.entry(z).or_default() += 1u32;
    }
    Ok(ZHistogram { n, k, counts, source: HistogramSource::MonteCarlo { samples } })
}

/// `mu_{n;k}(perm) = k! Z(perm) / (binom(n, k) n!)`.
pub fn mu_density(perm: &Permutation, k: usize) -> Result<ExactRatio> {
    let n = perm.len() as u64;
    let z = count_k_incseq(perm, k)?;
    Ok(ratio(z * factorial(k as u64), binomial(n, k as u64) * factorial(n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvMode {
    Exact,
    Estimated,
}

impl TvMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub n: usize,
    pub k: usize,
    pub mode: TvMode,
    /// Present in exact mode.
    #[serde(with = "opt_ratio")]
    pub exact: Option<ExactRatio>,
    pub tv: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    pub samples: u64,
}

mod opt_ratio {
    use super::ExactRatio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<ExactRatio>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ExactRatio>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| t.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Exact `||mu_{n;k} - U_n||` from the histogram of `Z`.
pub fn total_variation_exact(n: usize, k: usize) -> Result<TvReport> {
    let hist = z_histogram_exact(n, k)?;
    let tv = tv_from_histogram(&hist)?;
    Ok(TvReport {
        n,
        k,
        mode: TvMode::Exact,
        tv: crate::exact::ratio_to_f64(&tv),
        exact: Some(tv),
        stderr: 0.0,
        samples: 0,
    })
}

/// `sum_z count(z) |z - E Z| / (2 n! E Z)`.
pub fn tv_from_histogram(hist: &ZHistogram) -> Result<ExactRatio> {
    let mean = expected_count(hist.n as u64, hist.k as u64)?;
    let mut deviation = BigRational::zero();
    for (z, count) in &hist.counts {
        let z = BigRational::from_integer(BigInt::from(z.clone()));
        deviation += (z - &mean).abs() * BigRational::from_integer(BigInt::from(count.clone()));
    }
    let scale = BigRational::from_integer(BigInt::from(hist.total_mass() * 2u32)) * mean;
    Ok(deviation / scale)
}

/// `Z / E Z` as a float, robust to either side overflowing `f64`.
fn normalized(z: &BigUint, mean: &ExactRatio, mean_f64: f64) -> f64 {
    if z.is_zero() {
        return 0.0;
    }
    match z.to_f64() {
        Some(zf) if zf.is_finite() && mean_f64.is_finite() && mean_f64 > 0.0 => zf / mean_f64,
        _ => (ln_big(z) - ln_ratio(mean)).exp(),
    }
}

fn mean_as_f64(mean: &ExactRatio) -> f64 {
    crate::exact::ratio_to_f64(mean)
}

/// Estimates the total-variation distance as half the sample mean of `|Z / E Z - 1|` under `U_n`.
pub fn total_variation_mc(n: usize, k: usize, samples: u64, rng: &mut RandomStream) -> Result<TvReport> {
    check_nk(n, k)?;
    if samples < 1 {
        return Err(domain("need at least one sample"));
    }
    let mean = expected_count(n as u64, k as u64)?;
    let mean_f = mean_as_f64(&mean);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let z = count_k_incseq(&sample_uniform(n, rng), k)?;
        let dev = (normalized(&z, &mean, mean_f) - 1.0).abs() / 2.0;
        sum += dev;
        sum_sq += dev * dev;
    }
    let est = McEstimate::from_sums(sum, sum_sq, samples);
    Ok(TvReport {
        n,
        k,
        mode: TvMode::Estimated,
        exact: None,
        tv: est.estimate,
        stderr: est.stderr,
        samples,
    })
}

pub const TV_HEADER: &str = "n,k,mode,tv_num,tv_den,tv_float,stderr";

pub fn write_tv_csv(reports: &[TvReport], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{TV_HEADER}")?;
    for r in reports {
        let (num, den) = match &r.exact {
            Some(v) => (v.numer().to_string(), v.denom().to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{},{},{},{},{},{:e},{:e}", r.n, r.k, r.mode.as_str(), num, den, r.tv, r.stderr)?;
    }
    Ok(())
}

/// Monte Carlo `P(|Z / E Z - 1| > epsilon)` under `U_n`.
pub fn lln_exceedance(
    n: usize,
    k: usize,
    epsilon: f64,
    samples: u64,
    rng: &mut RandomStream,
) -> Result<McEstimate> {
    check_nk(n, k)?;
    if !(epsilon > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if samples < 1 {
        return Err(domain("need at least one sample"));
    }
    let mean = expected_count(n as u64, k as u64)?;
    let mean_f = mean_as_f64(&mean);
    let mut hits = 0u64;
    for _ in 0..samples {
        let z = count_k_incseq(&sample_uniform(n, rng), k)?;
        if (normalized(&z, &mean, mean_f) - 1.0).abs() > epsilon {
            hits += 1;
        }
    }
    let h = hits as f64;
    Ok(McEstimate::from_sums(h, h, samples))
}

/// Exact `P(|Z / E Z - 1| > epsilon)` by enumerating `S_n`.
pub fn lln_exceedance_exact(n: usize, k: usize, epsilon: f64) -> Result<ExactRatio> {
    if !(epsilon > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let hist = z_histogram_exact(n, k)?;
    let mean = expected_count(n as u64, k as u64)?;
    let eps = BigRational::from_float(epsilon).ok_or_else(|| domain("epsilon is not finite"))?;
    let mut hits = BigUint::zero();
    for (z, count) in &hist.counts {
        let z = BigRational::from_integer(BigInt::from(z.clone()));
        if (z / &mean - BigRational::from_integer(1.into())).abs() > eps {
            hits += count;
        }
    }
    Ok(ratio(hits, hist.total_mass()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub l: f64,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub exceedance: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Stream for one `(l, n, epsilon)` cell, independent of which other cells are run.
pub fn scan_cell_stream(seed: u64, l: f64, n: usize, epsilon: f64) -> RandomStream {
    let label = format!("exponent-scan|l={:016x}|n={n}|eps={:016x}", l.to_bits(), epsilon.to_bits());
    RandomStream::from_seed(seed).derive(label.as_bytes())
}

/// Exceedance probabilities over the grid `l_list x n_list`, rows ordered by `l` then `n`.
pub fn exponent_scan(
    l_list: &[f64],
    n_list: &[usize],
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<Vec<ExponentRow>> {
    for &l in l_list {
        if !(l > 0.0 && l < 0.5) {
            return Err(domain(format!("scan exponent must lie in (0, 0.5), got {l}")));
        }
    }
    let cells: Vec<(f64, usize)> = l_list
        .iter()
        .flat_map(|&l| n_list.iter().map(move |&n| (l, n)))
        .collect();
    cells
        .par_iter()
        .map(|&(l, n)| {
            let k = k_for_exponent(n, l);
            let mut rng = scan_cell_stream(seed, l, n, epsilon);
            let est = lln_exceedance(n, k, epsilon, samples, &mut rng)?;
            Ok(ExponentRow {
                l,
                n,
                k,
                epsilon,
                exceedance: est.estimate,
                stderr: est.stderr,
                samples,
                seed,
            })
        })
        .collect()
}

pub const EXPONENT_SCAN_HEADER: &str = "l,n,k,epsilon,exceedance,stderr,samples,seed";

pub fn write_exponent_scan_csv(rows: &[ExponentRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{EXPONENT_SCAN_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:e},{:e},{},{}",
            r.l, r.n, r.k, r.epsilon, r.exceedance, r.stderr, r.samples, r.seed
        )?;
    }
    Ok(())
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected probabilities.
///
/// Cells with zero expected probability must have zero observations; they
/// do not contribute degrees of freedom.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(domain("observed and expected have different lengths"));
    }
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            if o != 0 {
                return Ok(ChiSquare { statistic: f64::INFINITY, dof: 0, p_value: 0.0 });
            }
            continue;
        }
        let e = p * total as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| domain(e.to_string()))?;
    Ok(ChiSquare { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio_from_int;
    use crate::perm::sample_mu;

    fn q(n: i64, d: i64) -> ExactRatio {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn histogram_examples() {
        let h = z_histogram_exact(3, 2).unwrap();
        let expect: BTreeMap<_, _> =
            [(3, 1), (2, 2), (1, 2), (0, 1)].iter().map(|&(z, c)| (big(z), big(c))).collect();
        assert_eq!(h.counts, expect);
        let h = z_histogram_exact(2, 2).unwrap();
        assert_eq!(h.counts, [(big(1), big(1)), (big(0), big(1))].into_iter().collect());
        assert!(z_histogram_exact(9, 2).is_err());
    }

    #[test]
    fn histogram_mass_identity() {
        for n in 1..=7usize {
            for k in 1..=n {
                let h = z_histogram_exact(n, k).unwrap();
                assert_eq!(h.total_mass(), factorial(n as u64));
                let weighted: BigUint = h.counts.iter().map(|(z, c)| z * c).sum();
                let expect = expected_count(n as u64, k as u64).unwrap() * ratio_from_int(factorial(n as u64));
                assert_eq!(ratio_from_int(weighted), expect);
                assert!(h.counts.keys().all(|z| *z <= binomial(n as u64, k as u64)));
            }
        }
    }

    #[test]
    fn tv_examples() {
        for n in 1..=8 {
            assert_eq!(total_variation_exact(n, 1).unwrap().exact.unwrap(), q(0, 1));
        }
        assert_eq!(total_variation_exact(2, 2).unwrap().exact.unwrap(), q(1, 2));
        assert_eq!(total_variation_exact(3, 2).unwrap().exact.unwrap(), q(5, 18));
    }

    /// `1/2 sum_s |mu(s) - 1/n!|` summed permutation by permutation.
    fn tv_by_permutation(n: usize, k: usize) -> ExactRatio {
        let uniform = ratio(big(1), factorial(n as u64));
        let mut acc = BigRational::zero();
        for_each_permutation(n, |p| {
            let perm = Permutation::new(p.to_vec()).unwrap();
            acc += (mu_density(&perm, k).unwrap() - &uniform).abs();
        });
        acc / q(2, 1)
    }

    #[test]
    fn tv_two_orders_agree() {
        for n in 1..=6 {
            for k in 1..=n {
                let tv = total_variation_exact(n, k).unwrap().exact.unwrap();
                assert_eq!(tv, tv_by_permutation(n, k));
                assert!(tv >= q(0, 1) && tv <= q(1, 1));
            }
        }
    }

    #[test]
    fn density_identity() {
        for n in 1..=6usize {
            for k in 1..=n {
                let mut mass = BigRational::zero();
                for_each_permutation(n, |p| {
                    let perm = Permutation::new(p.to_vec()).unwrap();
                    let mu = mu_density(&perm, k).unwrap();
                    let z = count_k_incseq(&perm, k).unwrap();
                    let lhs = &mu * ratio_from_int(factorial(n as u64) * binomial(n as u64, k as u64));
                    assert_eq!(lhs, ratio_from_int(z * factorial(k as u64)));
                    mass += mu;
                });
                assert_eq!(mass, q(1, 1));
            }
        }
    }

    #[test]
    fn tv_mc_examples() {
        let mut rng = RandomStream::from_seed(5);
        let r = total_variation_mc(3, 2, 100_000, &mut rng).unwrap();
        assert!((r.tv - 5.0 / 18.0).abs() < 0.01);
        let r = total_variation_mc(10, 1, 1_000, &mut rng).unwrap();
        assert_eq!((r.tv, r.stderr), (0.0, 0.0));
    }

    #[test]
    fn tv_mc_unbiased() {
        let exact = total_variation_exact(5, 2).unwrap().tv;
        let root = RandomStream::from_seed(77);
        let reps: Vec<TvReport> = (0..200)
            .map(|i| total_variation_mc(5, 2, 500, &mut root.split(i)).unwrap())
            .collect();
        let mean = reps.iter().map(|r| r.tv).sum::<f64>() / 200.0;
        let combined = reps.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / 200.0;
        assert!((mean - exact).abs() < 3.0 * combined, "{mean} vs {exact} ({combined})");
    }

    #[test]
    fn lln_deterministic_case() {
        let mut rng = RandomStream::from_seed(6);
        let e = lln_exceedance(30, 1, 0.01, 1_000, &mut rng).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(lln_exceedance_exact(6, 1, 0.01).unwrap(), q(0, 1));
        assert!(lln_exceedance(30, 2, 0.0, 10, &mut rng).is_err());
    }

    #[test]
    fn lln_exact_matches_mc() {
        let exact = crate::exact::ratio_to_f64(&lln_exceedance_exact(7, 3, 0.25).unwrap());
        let mut rng = RandomStream::from_seed(8);
        let est = lln_exceedance(7, 3, 0.25, 40_000, &mut rng).unwrap();
        assert!((est.estimate - exact).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn mu_sampler_k1_is_uniform() {
        let mut rng = RandomStream::from_seed(21);
        let index = permutation_index(4);
        let mut observed = vec![0u64; 24];
        for _ in 0..100_000 {
            let p = sample_mu(4, 1, &mut rng).unwrap();
            observed[index[p.images()]] += 1;
        }
        let chi = chi_square_test(&observed, &[1.0 / 24.0; 24]).unwrap();
        assert!(chi.p_value > 0.001, "{chi:?}");
    }

    #[test]
    fn uniform_sampler_n3() {
        let mut rng = RandomStream::from_seed(22);
        let index = permutation_index(3);
        let mut observed = vec![0u64; 6];
        for _ in 0..60_000 {
            observed[index[sample_uniform(3, &mut rng).images()]] += 1;
        }
        assert!(observed.iter().all(|&c| (9_500..=10_500).contains(&c)), "{observed:?}");
        assert!(chi_square_test(&observed, &[1.0 / 6.0; 6]).unwrap().p_value > 0.001);
    }

    fn permutation_index(n: usize) -> HashMap<Vec<u32>, usize> {
        let mut index = HashMap::new();
        for_each_permutation(n, |p| {
            let next = index.len();
            index.insert(p.to_vec(), next);
        });
        index
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let chi = chi_square_test(&[900, 100], &[0.5, 0.5]).unwrap();
        assert!(chi.p_value < 1e-6);
        let chi = chi_square_test(&[1, 5], &[0.0, 1.0]).unwrap();
        assert_eq!(chi.p_value, 0.0);
    }

    #[test]
    fn exponent_scan_is_reproducible() {
        let a = exponent_scan(&[0.3], &[50, 100], 0.25, 300, 7).unwrap();
        let b = exponent_scan(&[0.3], &[50, 100], 0.25, 300, 7).unwrap();
        assert_eq!(a, b);
        // Adding cells does not disturb existing ones.
        let c = exponent_scan(&[0.2, 0.3], &[50, 100, 200], 0.25, 300, 7).unwrap();
        assert_eq!(c[3], a[0]);
        assert_eq!(c[4], a[1]);
        assert!(exponent_scan(&[0.5], &[50], 0.25, 10, 7).is_err());
    }

    #[test]
    fn tv_csv_shape() {
        let reports = vec![
            total_variation_exact(3, 2).unwrap(),
            total_variation_mc(3, 2, 100, &mut RandomStream::from_seed(1)).unwrap(),
        ];
        let mut buf = Vec::new();
        write_tv_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TV_HEADER);
        assert!(lines[1].starts_with("3,2,exact,5,18,"));
        assert!(lines[2].starts_with("3,2,estimated,,,"));
    }
}
