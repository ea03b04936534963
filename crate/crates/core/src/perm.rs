//! Permutations, increasing-subsequence counts, and samplers for `U_n` and `mu_{n;k}`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{budget, domain, Error, Result};
use crate::exact::{binomial, factorial, ratio, BigCount, ExactRatio};
use crate::rng::RandomStream;

/// Largest number of index subsets [`brute_force_count`] will enumerate.
pub const BRUTE_FORCE_CAP: u64 = 10_000_000;

/// A permutation of `1..=n` in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<u32>,
}

impl Permutation {
    pub fn new(images: Vec<u32>) -> Result<Self> {
        let n = images.len();
        if n == 0 {
            return Err(domain("a permutation needs at least one element"));
        }
        let mut seen = vec![false; n + 1];
        for &v in &images {
            let slot = v as usize;
            if slot == 0 || slot > n || seen[slot] {
                return Err(domain(format!("{images:?} is not a permutation of 1..={n}")));
            }
            seen[slot] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (1..=n as u32).collect(),
        }
    }

    pub fn reverse(n: usize) -> Self {
        Self {
            images: (1..=n as u32).rev().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    /// `positions()[v - 1]` is the (0-based) position holding value `v`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.images.len()];
        for (i, &v) in self.images.iter().enumerate() {
            pos[v as usize - 1] = i;
        }
        pos
    }

    /// Whether the values of `chain` appear in increasing positional order.
    pub fn contains_chain(&self, chain: &IndexSet) -> bool {
        let pos = self.positions();
        chain
            .values()
            .windows(2)
            .all(|w| pos[w[0] as usize - 1] < pos[w[1] as usize - 1])
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let images = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(images)
    }
}

/// Calls `visit` once for every permutation of `1..=n` (Heap's algorithm, in place).
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[u32])) {
    let mut a: Vec<u32> = (1..=n as u32).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(domain(format!("subsequence length must satisfy 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// Number of strictly increasing subsequences of length `k`.
///
/// Uses a Fenwick tree over values in `u128` whenever every intermediate
/// count is provably below `2^127`, and the quadratic big-integer recurrence
/// otherwise.
pub fn count_k_incseq(perm: &Permutation, k: usize) -> Result<BigCount> {
    let n = perm.len();
    check_k(n, k)?;
    if fits_u128(n, k) {
        Ok(BigUint::from(count_fenwick_u128(perm.images(), k)))
    } else {
        Ok(count_quadratic(perm.images(), k))
    }
}

/// Reference recurrence `c[i][t] = sum_{h<i, s(h)<s(i)} c[h][t-1]`, `c[i][1] = 1`.
pub fn count_k_incseq_quadratic(perm: &Permutation, k: usize) -> Result<BigCount> {
    check_k(perm.len(), k)?;
    Ok(count_quadratic(perm.images(), k))
}

fn fits_u128(n: usize, k: usize) -> bool {
    // Every partial count at level t is bounded by binom(n, t).
    let peak = k.min(n / 2) as u64;
    binomial(n as u64, peak).bits() < 127
}

fn count_quadratic(images: &[u32], k: usize) -> BigCount {
    let n = images.len();
    let mut prev: Vec<BigUint> = vec![BigUint::one(); n];
    for _ in 2..=k {
        let mut next = vec![BigUint::zero(); n];
        for i in 0..n {
            let mut acc = BigUint::zero();
            for h in 0..i {
                if images[h] < images[i] {
                    acc += &prev[h];
                }
            }
            next[i] = acc;
        }
        prev = next;
    }
    prev.into_iter().sum()
}

/// Fast count on raw one-line notation; the caller guarantees `binom(n, k)` fits in `u128`.
pub(crate) fn count_images(images: &[u32], k: usize) -> u128 {
    debug_assert!(fits_u128(images.len(), k));
    count_fenwick_u128(images, k)
}

fn count_fenwick_u128(images: &[u32], k: usize) -> u128 {
    let n = images.len();
    let mut prev = vec![1u128; n];
    let mut tree = vec![0u128; n + 1];
    for _ in 2..=k {
        tree.iter_mut().for_each(|x| *x = 0);
        let mut next = vec![0u128; n];
        for i in 0..n {
            let v = images[i] as usize;
            let mut idx = v - 1;
            let mut acc = 0u128;
            while idx > 0 {
                acc += tree[idx];
                idx &= idx - 1;
            }
            next[i] = acc;
            let mut idx = v;
            while idx <= n {
                tree[idx] += prev[i];
                idx += idx & idx.wrapping_neg();
            }
        }
        prev = next;
    }
    prev.iter().sum()
}

/// Direct enumeration of all `k`-subsets of positions.
pub fn brute_force_count(perm: &Permutation, k: usize) -> Result<BigCount> {
    brute_force_count_with_cap(perm, k, BRUTE_FORCE_CAP)
}

pub fn brute_force_count_with_cap(perm: &Permutation, k: usize, cap: u64) -> Result<BigCount> {
    let n = perm.len();
    check_k(n, k)?;
    let subsets = binomial(n as u64, k as u64);
    if subsets > BigUint::from(cap) {
        return Err(budget(
            "index subsets to enumerate",
            subsets.to_u128().unwrap_or(u128::MAX),
            cap,
        ));
    }
    let images = perm.images();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut count = 0u64;
    loop {
        if idx.windows(2).all(|w| images[w[0]] < images[w[1]]) {
            count += 1;
        }
        // Advance to the next k-combination in lexicographic order.
        let mut r = k;
        while r > 0 && idx[r - 1] == n - k + r - 1 {
            r -= 1;
        }
        if r == 0 {
            break;
        }
        idx[r - 1] += 1;
        for s in r..k {
            idx[s] = idx[s - 1] + 1;
        }
    }
    Ok(BigUint::from(count))
}

/// `Z_{n,t}(perm)` for every `t = 1..=n` from a single pass; entry `t - 1` holds length `t`.
pub fn count_profile(perm: &Permutation) -> Vec<BigCount> {
    let images = perm.images();
    let n = images.len();
    // ending[i][t - 1]: increasing subsequences of length t ending at position i.
    let mut ending: Vec<Vec<BigUint>> = Vec::with_capacity(n);
    let mut totals = vec![BigUint::zero(); n];
    for i in 0..n {
        let mut row = vec![BigUint::zero(); i + 1];
        row[0] = BigUint::one();
        for h in 0..i {
            if images[h] < images[i] {
                for (t, c) in ending[h].iter().enumerate() {
                    if !c.is_zero() {
                        row[t + 1] += c;
                    }
                }
            }
        }
        for (t, c) in row.iter().enumerate() {
            totals[t] += c;
        }
        ending.push(row);
    }
    totals
}

pub fn sample_uniform(n: usize, rng: &mut RandomStream) -> Permutation {
    let mut images: Vec<u32> = (1..=n as u32).collect();
    images.shuffle(rng);
    Permutation { images }
}

/// A draw from `mu_{n;k}`: `k` random values stay in increasing order and the
/// remaining values are scattered uniformly around them.
pub fn sample_mu(n: usize, k: usize, rng: &mut RandomStream) -> Result<Permutation> {
    check_k(n, k)?;
    let mut marked = vec![false; n];
    for v in rand::seq::index::sample(rng, n, k) {
        marked[v] = true;
    }
    let chain = (1..=n as u32).filter(|v| marked[*v as usize - 1]);
    let mut loose: Vec<u32> = (1..=n as u32).filter(|v| !marked[*v as usize - 1]).collect();
    loose.shuffle(rng);

    let mut loose_slot = vec![false; n];
    for s in rand::seq::index::sample(rng, n, n - k) {
        loose_slot[s] = true;
    }
    let mut images = vec![0u32; n];
    let mut loose_iter = loose.into_iter();
    let mut chain_iter = chain;
    for (slot, image) in images.iter_mut().enumerate() {
        *image = if loose_slot[slot] {
            loose_iter.next()
        } else {
            chain_iter.next()
        }
        .expect("slot counts match value counts");
    }
    Ok(Permutation { images })
}

/// Strictly increasing set of values `x_1 < ... < x_k` in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    values: Vec<u32>,
}

impl IndexSet {
    pub fn new(values: Vec<u32>, n: usize) -> Result<Self> {
        if values.iter().any(|&v| v == 0 || v as usize > n) {
            return Err(domain(format!("{values:?} has entries outside 1..={n}")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain(format!("{values:?} is not strictly increasing")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How two `k`-sets interleave: `j` common elements, and the counts `l_r`
/// (from the first set) and `m_r` (from the second) lying strictly between
/// consecutive common elements, with `r = 0` before the first and `r = j`
/// after the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterlacingProfile {
    pub j: usize,
    pub l: Vec<u32>,
    pub m: Vec<u32>,
}

pub fn interlacing_profile(x: &IndexSet, y: &IndexSet) -> Result<InterlacingProfile> {
    if x.len() != y.len() {
        return Err(Error::Inconsistent(format!(
            "index sets have different sizes {} and {}",
            x.len(),
            y.len()
        )));
    }
    let common: Vec<u32> = x
        .values()
        .iter()
        .copied()
        .filter(|v| y.values().binary_search(v).is_ok())
        .collect();
    let j = common.len();
    let blocks = |set: &IndexSet| {
        let mut counts = vec![0u32; j + 1];
        for v in set.values() {
            if common.binary_search(v).is_err() {
                // Number of common elements below v picks the block.
                let block = common.partition_point(|c| c < v);
                counts[block] += 1;
            }
        }
        counts
    };
    Ok(InterlacingProfile {
        j,
        l: blocks(x),
        m: blocks(y),
    })
}

/// Probability that a uniform permutation contains two `k`-chains with the given interlacing:
/// `prod_r binom(l_r + m_r, l_r) / (2k - j)!`.
pub fn pair_expectation(profile: &InterlacingProfile, k: usize) -> Result<ExactRatio> {
    let j = profile.j;
    if profile.l.len() != j + 1 || profile.m.len() != j + 1 || j > k {
        return Err(Error::Inconsistent(format!(
            "profile with j={j} needs j+1 blocks and j <= k={k}"
        )));
    }
    let free = (k - j) as u64;
    let sum_l: u64 = profile.l.iter().map(|&v| v as u64).sum();
    let sum_m: u64 = profile.m.iter().map(|&v| v as u64).sum();
    if sum_l != free || sum_m != free {
        return Err(Error::Inconsistent(format!(
            "interlacing sums {sum_l}, {sum_m} differ from k - j = {free}"
        )));
    }
    let extensions = profile
        .l
        .iter()
        .zip(&profile.m)
        .fold(BigUint::one(), |acc, (&l, &m)| {
            acc * binomial(l as u64 + m as u64, l as u64)
        });
    Ok(ratio(extensions, factorial((2 * k - j) as u64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn perm(s: &str) -> Permutation {
        s.parse().unwrap()
    }

    fn set(v: &[u32], n: usize) -> IndexSet {
        IndexSet::new(v.to_vec(), n).unwrap()
    }

    #[test]
    fn worked_example_has_four() {
        let p = perm("1,3,4,5,2");
        assert_eq!(count_k_incseq(&p, 3).unwrap(), BigUint::from(4u32));
        assert_eq!(count_k_incseq_quadratic(&p, 3).unwrap(), BigUint::from(4u32));
        assert_eq!(brute_force_count(&p, 3).unwrap(), BigUint::from(4u32));
        assert_eq!(count_profile(&p)[2], BigUint::from(4u32));
    }

    #[test]
    fn reverse_and_identity() {
        for n in 2..12 {
            assert!(count_k_incseq(&Permutation::reverse(n), 2).unwrap().is_zero());
            for k in 1..=n {
                assert_eq!(
                    count_k_incseq(&Permutation::identity(n), k).unwrap(),
                    binomial(n as u64, k as u64)
                );
            }
        }
        let ones = |v: &[u32]| v.iter().map(|&x| BigUint::from(x)).collect::<Vec<_>>();
        assert_eq!(count_profile(&Permutation::identity(3)), ones(&[3, 3, 1]));
        assert_eq!(count_profile(&Permutation::reverse(4)), ones(&[4, 0, 0, 0]));
    }

    #[test]
    fn big_identity_uses_big_integers() {
        // binom(200, 100) overflows u128, forcing the quadratic path.
        let p = Permutation::identity(200);
        assert_eq!(count_k_incseq(&p, 100).unwrap(), binomial(200, 100));
    }

    #[test]
    fn k_out_of_range() {
        let p = Permutation::identity(4);
        assert!(count_k_incseq(&p, 0).is_err());
        assert!(count_k_incseq(&p, 5).is_err());
        assert!(brute_force_count(&p, 5).is_err());
    }

    #[test]
    fn brute_force_cap() {
        let p = Permutation::identity(30);
        assert!(matches!(
            brute_force_count(&p, 15),
            Err(Error::Budget { .. })
        ));
        assert_eq!(brute_force_count(&p, 1).unwrap(), BigUint::from(30u32));
    }

    #[test]
    fn parse_and_display() {
        let p = perm("1, 3,4,5,2");
        assert_eq!(p.to_string(), "1,3,4,5,2");
        assert!("1,1,2".parse::<Permutation>().is_err());
        assert!("1,4".parse::<Permutation>().is_err());
        assert!("".parse::<Permutation>().is_err());
        assert!("a,b".parse::<Permutation>().is_err());
    }

    #[test]
    fn heap_enumerates_every_permutation_once() {
        let mut seen = std::collections::HashSet::new();
        for_each_permutation(5, |p| {
            assert!(seen.insert(p.to_vec()));
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn sampler_edge_cases() {
        let mut rng = RandomStream::from_seed(1);
        assert_eq!(sample_uniform(1, &mut rng), Permutation::identity(1));
        for _ in 0..20 {
            assert_eq!(sample_mu(6, 6, &mut rng).unwrap(), Permutation::identity(6));
        }
        assert!(sample_mu(3, 4, &mut rng).is_err());
        let a = sample_uniform(30, &mut RandomStream::from_seed(9));
        let b = sample_uniform(30, &mut RandomStream::from_seed(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mu_contains_its_chain() {
        let mut rng = RandomStream::from_seed(2);
        for _ in 0..200 {
            let p = sample_mu(9, 4, &mut rng).unwrap();
            assert!(count_k_incseq(&p, 4).unwrap() >= BigUint::one());
        }
    }

    #[test]
    fn interlacing_examples() {
        let pr = interlacing_profile(&set(&[1, 2], 4), &set(&[2, 3], 4)).unwrap();
        assert_eq!(pr, InterlacingProfile { j: 1, l: vec![1, 0], m: vec![0, 1] });
        let pr = interlacing_profile(&set(&[1, 2], 4), &set(&[3, 4], 4)).unwrap();
        assert_eq!(pr, InterlacingProfile { j: 0, l: vec![2], m: vec![2] });
        let x = set(&[1, 3, 5], 6);
        let pr = interlacing_profile(&x, &x).unwrap();
        assert_eq!(pr.j, 3);
        assert!(pr.l.iter().chain(&pr.m).all(|&v| v == 0));
    }

    #[test]
    fn pair_expectation_examples() {
        let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let pr = interlacing_profile(&set(&[1, 2], 4), &set(&[2, 3], 4)).unwrap();
        assert_eq!(pair_expectation(&pr, 2).unwrap(), q(1, 6));
        let pr = interlacing_profile(&set(&[1, 2], 4), &set(&[3, 4], 4)).unwrap();
        assert_eq!(pair_expectation(&pr, 2).unwrap(), q(1, 4));
        for k in 1..8u32 {
            let x = set(&(1..=k).collect::<Vec<_>>(), 10);
            let pr = interlacing_profile(&x, &x).unwrap();
            let expect = ratio(BigUint::one(), factorial(k as u64));
            assert_eq!(pair_expectation(&pr, k as usize).unwrap(), expect);
        }
    }

    #[test]
    fn pair_expectation_rejects_inconsistent_profile() {
        let bad = InterlacingProfile { j: 1, l: vec![1, 1], m: vec![0, 1] };
        assert!(pair_expectation(&bad, 2).is_err());
        let short = InterlacingProfile { j: 1, l: vec![1], m: vec![1] };
        assert!(pair_expectation(&short, 2).is_err());
        assert!(interlacing_profile(&set(&[1], 3), &set(&[1, 2], 3)).is_err());
    }

    #[test]
    fn index_set_validation() {
        assert!(IndexSet::new(vec![2, 1], 3).is_err());
        assert!(IndexSet::new(vec![1, 4], 3).is_err());
        assert!(IndexSet::new(vec![0, 1], 3).is_err());
    }
}
