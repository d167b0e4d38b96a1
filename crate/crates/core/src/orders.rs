//! Parities of multinomial occupancies and the orders used to compare their laws.
//!
//! `k` balls land independently in bins `0..=N` with probabilities
//! `p_0 <= ... <= p_N`; `I_k` records which bins received an odd number.
//! For even `k` the number of odd bins is even, so `I_k` lives in the set
//! `Σ` of even-weight configurations. Exact laws are computed by a dynamic
//! program over parity states and are generic over the scalar type, so the
//! same code runs in floating point and in exact rational arithmetic.

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::stats;

/// Largest `N` for the exact parity dynamic program (`2^{N+1}` states).
pub const MAX_EXACT_N: usize = 12;

/// Bin weights `p_0, ..., p_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T: Scalar> {
    p: Vec<T>,
    sorted: bool,
}

impl<T: Scalar> WeightVector<T> {
    /// Validated and sorted ascending.
    pub fn new(mut p: Vec<T>) -> Result<Self> {
        Self::validate(&p)?;
        p.sort_by(|a, b| a.partial_cmp(b).expect("comparable weights"));
        Ok(WeightVector { p, sorted: true })
    }

    /// Validated but kept in the given order; used to show that sorting matters.
    pub fn unsorted(p: Vec<T>) -> Result<Self> {
        Self::validate(&p)?;
        let sorted = p.windows(2).all(|w| w[0] <= w[1]);
        Ok(WeightVector { p, sorted })
    }

    fn validate(p: &[T]) -> Result<()> {
        if p.len() < 2 {
            return Err(Error::InvalidPmf("need at least two bins".into()));
        }
        if p.iter().any(|x| *x < T::zero()) {
            return Err(Error::InvalidPmf("negative weight".into()));
        }
        let total = scalar::sum(p);
        if !total.approx_eq(&T::one()) {
            return Err(Error::InvalidPmf(format!("weights sum to {total:?}")));
        }
        Ok(())
    }

    pub fn weights(&self) -> &[T] {
        &self.p
    }

    /// `N`, one less than the number of bins.
    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }
}

/// A configuration in `{0,1}^{N+1}`, bit `i` for bin `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParityConfig {
    bits: u32,
    len: u8,
}

impl ParityConfig {
    pub fn from_bits(bits: u32, len: usize) -> Self {
        assert!(len <= 31);
        ParityConfig {
            bits: bits & ((1u32 << len) - 1),
            len: len as u8,
        }
    }

    pub fn from_slice(b: &[u8]) -> Self {
        let bits = b
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &x)| acc | (((x != 0) as u32) << i));
        ParityConfig::from_bits(bits, b.len())
    }

    pub fn zeros(len: usize) -> Self {
        ParityConfig::from_bits(0, len)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.bit(i) as u8).collect()
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn in_sigma(&self) -> bool {
        self.weight().is_multiple_of(2)
    }

    /// Position in `Σ`: the low `N` bits; bit `N` is their parity.
    pub fn sigma_index(&self) -> usize {
        (self.bits & ((1u32 << (self.len() - 1)) - 1)) as usize
    }

    pub fn from_sigma_index(i: usize, n: usize) -> Self {
        let low = i as u32 & ((1u32 << n) - 1);
        let top = low.count_ones() & 1;
        ParityConfig::from_bits(low | top << n, n + 1)
    }
}

/// Every element of `Σ ⊆ {0,1}^{N+1}` in index order.
pub fn sigma(n: usize) -> Vec<ParityConfig> {
    (0..1usize << n).map(|i| ParityConfig::from_sigma_index(i, n)).collect()
}

/// A law on `Σ`, indexed by [`ParityConfig::sigma_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistOnSigma<T: Scalar> {
    n: usize,
    probs: Vec<T>,
}

impl<T: Scalar> DistOnSigma<T> {
    pub fn new(n: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::LengthMismatch {
                left: 1 << n,
                right: probs.len(),
            });
        }
        if probs.iter().any(|x| *x < T::zero()) {
            return Err(Error::InvalidPmf("negative mass".into()));
        }
        if !scalar::sum(&probs).approx_eq(&T::one()) {
            return Err(Error::InvalidPmf("masses do not sum to 1".into()));
        }
        Ok(DistOnSigma { n, probs })
    }

    pub fn uniform(n: usize) -> Self {
        let m = 1usize << n;
        DistOnSigma {
            n,
            probs: vec![T::from_ratio(1, m as i64); m],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, c: &ParityConfig) -> T {
        self.probs[c.sigma_index()].clone()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.probs.iter().map(|x| x.to_f64()).collect()
    }
}

/// `P(Bin(n, p) is even) = (1 + (1 - 2p)^n) / 2`.
pub fn binom_parity_even<T: Scalar>(n: u64, p: T) -> T {
    let two = T::from_ratio(2, 1);
    let base = T::one() - two.clone() * p;
    let mut pow = T::one();
    for _ in 0..n {
        pow = pow * base.clone();
    }
    (T::one() + pow) / two
}

/// Exact law of `I_k` on `Σ`. Only even `k` is supported.
pub fn parity_dist<T: Scalar>(w: &WeightVector<T>, k: usize) -> Result<DistOnSigma<T>> {
    if k % 2 == 1 {
        return Err(Error::OddBallCount(k));
    }
    let n = w.n();
    if n > MAX_EXACT_N {
        return Err(Error::Precondition(format!(
            "exact parity law needs N <= {MAX_EXACT_N}, got {n}"
        )));
    }
    let states = 1usize << (n + 1);
    let mut cur = vec![T::zero(); states];
    cur[0] = T::one();
    let mut next = vec![T::zero(); states];
    for _ in 0..k {
        for x in next.iter_mut() {
            *x = T::zero();
        }
        for (s, mass) in cur.iter().enumerate() {
            if *mass == T::zero() {
                continue;
            }
            for (i, p) in w.weights().iter().enumerate() {
                next[s ^ (1 << i)] = next[s ^ (1 << i)].clone() + mass.clone() * p.clone();
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let probs = (0..1usize << n)
        .map(|i| cur[ParityConfig::from_sigma_index(i, n).bits() as usize].clone())
        .collect();
    Ok(DistOnSigma { n, probs })
}

/// Prefix order: every prefix sum of `a` is at most that of `b`.
pub fn prefix_leq(a: &ParityConfig, b: &ParityConfig) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut sa, mut sb) = (0u32, 0u32);
    for i in 0..a.len() {
        sa += a.bit(i) as u32;
        sb += b.bit(i) as u32;
        if sa > sb {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sorted_desc<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("comparable masses"));
    v
}

/// `mu` is majorized by `nu`: every top-`k` partial sum of the sorted masses
/// of `mu` is at most that of `nu`.
pub fn majorization_leq<T: Scalar>(mu: &DistOnSigma<T>, nu: &DistOnSigma<T>) -> Result<bool> {
    vector_majorized(mu.probs(), nu.probs())
}

/// Majorization of probability vectors of equal length.
pub fn vector_majorized<T: Scalar>(x: &[T], y: &[T]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let (a, b) = (sorted_desc(x), sorted_desc(y));
    let (mut sa, mut sb) = (T::zero(), T::zero());
    for (u, v) in a.into_iter().zip(b) {
        sa = sa + u;
        sb = sb + v;
        if !sa.approx_le(&sb) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Hinge-function test: `Σ (x_i - c)_+ <= Σ (y_i - c)_+` for every threshold
/// `c` among the entries. Together with equal totals this family generates
/// all convex functions, so it is equivalent to `x` majorized by `y`.
pub fn convex_hinge_check<T: Scalar>(x: &[T], y: &[T]) -> bool {
    let hinge = |v: &[T], c: &T| {
        v.iter()
            .filter(|e| *e > c)
            .fold(T::zero(), |acc, e| acc + e.clone() - c.clone())
    };
    x.iter().chain(y).all(|c| hinge(x, c).approx_le(&hinge(y, c)))
}

/// `Σ x_i^{-δ} <= Σ y_i^{-δ}` for `δ = 0.1, ..., 0.9`; a necessary condition
/// for `x` majorized by `y` (these functions are convex on `(0, 1]`).
pub fn power_family_check(x: &[f64], y: &[f64]) -> bool {
    (1..=9).all(|i| {
        let delta = i as f64 / 10.0;
        let f = |v: &[f64]| v.iter().map(|e| e.powf(-delta)).sum::<f64>();
        let (fx, fy) = (f(x), f(y));
        fx <= fy + 1e-9 * fy.abs().max(1.0) || fy.is_infinite()
    })
}

/// A Robin Hood transfer of `amount` from entry `from` to entry `to` of a
/// descending vector; each is a T-transform (a doubly stochastic map).
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer<T> {
    pub from: usize,
    pub to: usize,
    pub amount: T,
}

/// Constructive search for a chain of T-transforms turning the sorted `y`
/// into the sorted `x`; `Some` exactly when `x` is majorized by `y`.
pub fn t_transform_path<T: Scalar>(x: &[T], y: &[T]) -> Option<Vec<Transfer<T>>> {
    if x.len() != y.len() || !scalar::sum(x).approx_eq(&scalar::sum(y)) {
        return None;
    }
    let target = sorted_desc(x);
    let mut cur = sorted_desc(y);
    let n = cur.len();
    let mut steps = Vec::new();
    for _ in 0..n {
        let Some(j) = (0..n).find(|&i| !cur[i].approx_eq(&target[i])) else {
            return Some(steps);
        };
        // the first difference must be an excess in `cur`
        if cur[j] < target[j] {
            return None;
        }
        let k = (j + 1..n).find(|&i| cur[i] < target[i] && !cur[i].approx_eq(&target[i]))?;
        let excess = cur[j].clone() - target[j].clone();
        let deficit = target[k].clone() - cur[k].clone();
        let amount = if excess < deficit { excess } else { deficit };
        cur[j] = cur[j].clone() - amount.clone();
        cur[k] = cur[k].clone() + amount.clone();
        steps.push(Transfer { from: j, to: k, amount });
    }
    (0..n).all(|i| cur[i].approx_eq(&target[i])).then_some(steps)
}

/// Pairs `I ⪯ J` in `Σ` with `P(I_{2k} = I) < P(I_{2k} = J)`.
pub fn parity_order_violations<T: Scalar>(w: &WeightVector<T>, k: usize) -> Result<Vec<(ParityConfig, ParityConfig)>> {
    let dist = parity_dist(w, 2 * k)?;
    let all = sigma(w.n());
    let mut bad = Vec::new();
    for a in &all {
        for b in &all {
            if a != b && prefix_leq(a, b)? && !dist.prob(b).approx_le(&dist.prob(a)) {
                bad.push((*a, *b));
            }
        }
    }
    Ok(bad)
}

fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// One draw of the coupling `(I_{2k}, I_{2k+2})` with `I_{2k} ⪯ I_{2k+2}`:
/// `2k` balls plus two extra balls `(B, A)`; when they land in different bins
/// the parities at `B` and `A` are resampled given `R = M(A) + M(B)` through
/// one shared uniform.
pub fn couple_parity<R: Rng + ?Sized>(
    w: &WeightVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<(ParityConfig, ParityConfig)> {
    if !w.is_sorted() {
        return Err(Error::Precondition("the coupling needs ascending weights".into()));
    }
    let p = w.weights();
    let len = p.len();
    let mut m = vec![0u64; len];
    for _ in 0..2 * k {
        m[categorical(p, rng)] += 1;
    }
    let x = categorical(p, rng);
    let y = categorical(p, rng);
    let (b, a) = (x.min(y), x.max(y));
    let mut parity = 0u32;
    for (i, &c) in m.iter().enumerate() {
        if c % 2 == 1 {
            parity |= 1 << i;
        }
    }
    if a == b {
        let c = ParityConfig::from_bits(parity, len);
        return Ok((c, c));
    }
    let r = m[a] + m[b];
    let pb = p[b] / (p[a] + p[b]);
    let even = binom_parity_even(r, pb);
    let u: f64 = rng.random();
    let i2k_b = (u <= 1.0 - even) as u32;
    let i2k2_b = (u <= even) as u32;
    let rest = parity & !(1 << a) & !(1 << b);
    let build = |ib: u32| {
        let ia = ((r as u32) + ib) % 2;
        ParityConfig::from_bits(rest | ib << b | ia << a, len)
    };
    Ok((build(i2k_b), build(i2k2_b)))
}

/// Binomial coefficient as a big integer.
fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn check_walk_args(k: u64, x1: i64) -> Result<()> {
    if (x1.unsigned_abs()) > k || (k as i64 - x1).rem_euclid(2) != 0 {
        return Err(Error::Precondition(format!(
            "need |x1| <= k and k ≡ x1 (mod 2), got k = {k}, x1 = {x1}"
        )));
    }
    Ok(())
}

/// `P(Z_k = x1) / P(Z_l = x1) <= 2^{l-k}` for the discrete-time simple walk on Z,
/// decided exactly: it is equivalent to `C(k, (k+x1)/2) <= C(l, (l+x1)/2)`.
pub fn walk_ratio_bound(k: u64, l: u64, x1: i64) -> Result<bool> {
    if k > l {
        return Err(Error::Precondition(format!("need k <= l, got {k} > {l}")));
    }
    check_walk_args(k, x1)?;
    check_walk_args(l, x1)?;
    let ck = binomial(k, ((k as i64 + x1) / 2) as u64);
    let cl = binomial(l, ((l as i64 + x1) / 2) as u64);
    Ok(ck <= cl)
}

/// `ln P(Z_k = x1)`; `-inf` off the support.
pub fn ln_walk_prob(k: u64, x1: i64) -> f64 {
    if check_walk_args(k, x1).is_err() {
        return f64::NEG_INFINITY;
    }
    let up = ((k as i64 + x1) / 2) as u64;
    stats::ln_factorial(k) - stats::ln_factorial(up) - stats::ln_factorial(k - up) - k as f64 * std::f64::consts::LN_2
}

/// Conditional jump-count laws compared in the likelihood ratio order.
#[derive(Clone, Debug, PartialEq)]
pub struct LrCheck {
    /// Every cross-product inequality holds.
    pub lr_holds: bool,
    /// `P(R_Y <= j) >= P(R_X <= j)` for every `j`.
    pub cdf_dominates: bool,
    /// Poisson mass beyond `n_max` relative to the retained mass.
    pub tail: f64,
    /// Truncated conditional laws of `R_X` and `R_Y` on `0..=n_max`.
    pub law_x: Vec<f64>,
    pub law_y: Vec<f64>,
}

/// First-coordinate jump rate of a rate-`kappa` walk on Z^d.
pub fn first_coordinate_rate(kappa: f64, d: usize) -> f64 {
    kappa / d as f64
}

/// Likelihood ratio comparison of `R_Y | {Y_1 ≡ x1 mod 2}` below
/// `R_X | {X_1 = x1}`, where `R_X` is Poisson(`rate`) and `R_Y` is
/// Poisson(`rate / 2`) jump counts of the first coordinate.
///
/// `rate` is the first-coordinate rate (`κ/d` for a rate-`κ` walk on Z^d;
/// pass `κ` itself for the reading where `κ` is already per coordinate).
/// The inequality reduces to a statement free of the rate, so both readings
/// give the same verdict.
pub fn lr_order_check(rate: f64, x1: i64, n_max: usize) -> Result<LrCheck> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(crate::error::invalid("rate", "must be finite and >= 0"));
    }
    let n = n_max + 1;
    let min_k = x1.unsigned_abs() as usize;
    if rate == 0.0 {
        // both laws are point masses at |x1|
        let mut law = vec![0.0; n.max(min_k + 1)];
        law[min_k] = 1.0;
        return Ok(LrCheck {
            lr_holds: true,
            cdf_dominates: true,
            tail: 0.0,
            law_x: law.clone(),
            law_y: law,
        });
    }
    let ln_pois = |k: usize, mu: f64| k as f64 * mu.ln() - mu - stats::ln_factorial(k as u64);
    let lx: Vec<f64> = (0..n).map(|k| ln_pois(k, rate) + ln_walk_prob(k as u64, x1)).collect();
    let ly: Vec<f64> = (0..n)
        .map(|k| {
            if (k as i64 - x1).rem_euclid(2) == 0 {
                ln_pois(k, rate / 2.0)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let normalize = |v: &[f64]| {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
        let ln_z = m + s.ln();
        (v.iter().map(|x| (x - ln_z).exp()).collect::<Vec<f64>>(), ln_z)
    };
    let (law_x, ln_zx) = normalize(&lx);
    let (law_y, ln_zy) = normalize(&ly);
    // Poisson tail beyond n_max bounds the neglected unnormalized mass of both laws
    let tail_pois = |mu: f64| 1.0 - (0..n).map(|k| stats::poisson_pmf(k as u64, mu)).sum::<f64>();
    let tail = (tail_pois(rate).max(0.0).ln() - ln_zx)
        .exp()
        .max((tail_pois(rate / 2.0).max(0.0).ln() - ln_zy).exp());
    if tail > 1e-12 {
        return Err(Error::TailTooHeavy { tail, n_max });
    }
    let mut lr_holds = true;
    for k in min_k..n {
        for l in k..n {
            let (a, b) = (lx[k] + ly[l], lx[l] + ly[k]);
            if a.is_finite() && a > b + 1e-9 * b.abs().max(1.0) {
                lr_holds = false;
            }
        }
    }
    let (mut fx, mut fy) = (0.0, 0.0);
    let mut cdf_dominates = true;
    for k in 0..n {
        fx += law_x[k];
        fy += law_y[k];
        if fy + 1e-12 < fx {
            cdf_dominates = false;
        }
    }
    Ok(LrCheck {
        lr_holds,
        cdf_dominates,
        tail,
        law_x,
        law_y,
    })
}
