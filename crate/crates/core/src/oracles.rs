//! Brute-force reference implementations and the exact verification suites.
//!
//! Everything here is deliberately naive: enumeration instead of dynamic
//! programming, full rescans instead of incremental bookkeeping. The fast
//! routines elsewhere in the crate are tested against these.

use std::collections::HashMap;

use num_rational::BigRational;
use rand::Rng;

use crate::boxes::{classify_exit, zero_product_bound_check, zero_product_extremal, ExitCounts, SpaceTimeBox};
use crate::brw::{EndCause, EventKind, EventLog, ParticleId, ParticleRecord};
use crate::error::Result;
use crate::lattice::{Region, Site};
use crate::orders::{self, DistOnSigma, ParityConfig, WeightVector};
use crate::scalar::Scalar;
use crate::seed;

/// `P(Bin(n, p) even)` by summing the pmf over even counts.
pub fn binom_parity_even_pmf(n: u64, p: f64) -> f64 {
    (0..=n)
        .step_by(2)
        .map(|k| {
            // exact in f64 for the sizes used here
            let c = (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
            let a = if k == 0 { 1.0 } else { p.powi(k as i32) };
            let b = if n - k == 0 {
                1.0
            } else {
                (1.0 - p).powi((n - k) as i32)
            };
            c * a * b
        })
        .sum()
}

/// Law of the parity vector of `k` balls, by enumerating all `(N+1)^k`
/// assignments of balls to bins.
pub fn parity_dist_enumerate<T: Scalar>(w: &WeightVector<T>, k: usize) -> DistOnSigma<T> {
    let bins = w.weights().len();
    let n = bins - 1;
    let mut probs = vec![T::zero(); 1 << n];
    let total = bins.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let mut mass = T::one();
        let mut parity = 0u32;
        for _ in 0..k {
            let b = c % bins;
            c /= bins;
            mass = mass * w.weights()[b].clone();
            parity ^= 1 << b;
        }
        let idx = ParityConfig::from_bits(parity, bins).sigma_index();
        probs[idx] = probs[idx].clone() + mass;
    }
    DistOnSigma::new(n, probs).expect("enumeration yields a law on Σ")
}

/// Open bits by listing every oriented path from `(0, 0)`.
#[allow(clippy::needless_range_loop)]
pub fn open_by_paths(occupied: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let rows = occupied.len();
    let mut open: Vec<Vec<bool>> = (0..rows).map(|k| vec![false; k + 1]).collect();
    open[0][0] = true;
    // each path is a bit string of up-steps
    for len in 1..rows {
        for steps in 0u64..(1u64 << len) {
            let mut l = 0usize;
            let mut ok = true;
            for k in 1..=len {
                l += (steps >> (k - 1) & 1) as usize;
                if !occupied[k][l] {
                    ok = false;
                    break;
                }
            }
            if ok {
                open[len][l] = true;
            }
        }
    }
    open
}

fn touches(b: &SpaceTimeBox, x: &Site) -> bool {
    x.coords()
        .iter()
        .zip(b.origin_site.coords())
        .map(|(a, c)| (a - c).abs())
        .max()
        .unwrap_or(0)
        >= b.l
}

/// Exit counts from per-particle records, following each line of descent
/// through the records of its ancestors.
pub fn exit_counts_from_records(records: &[ParticleRecord], b: &SpaceTimeBox) -> Result<ExitCounts> {
    let by_id: HashMap<&ParticleId, &ParticleRecord> = records.iter().map(|r| (&r.id, r)).collect();
    let t_end = b.end_time();
    // first boundary contact of a record's own path before `t_end`
    let first_touch = |r: &ParticleRecord| -> Option<(f64, Site)> {
        if touches(b, &r.path.start_site) {
            return Some((r.birth_time, r.path.start_site));
        }
        r.path
            .jumps
            .iter()
            .find(|(t, s)| *t < t_end && touches(b, s))
            .map(|(t, s)| (*t, *s))
    };
    let mut counts = ExitCounts::zeros(b.d);
    for r in records {
        if r.birth_time >= t_end {
            continue;
        }
        let mut ancestor_touched = false;
        let mut id = r.id.parent();
        while let Some(a) = id {
            if let Some(rec) = by_id.get(&a) {
                if first_touch(rec).is_some_and(|(t, _)| t < rec.end_time) {
                    ancestor_touched = true;
                    break;
                }
            }
            id = a.parent();
        }
        if ancestor_touched {
            continue;
        }
        match first_touch(r) {
            Some((t, s)) if t <= r.end_time => {
                let region = classify_exit(b, t, &s)?;
                if !region.is_top() {
                    counts.n[region.index()] += 1;
                }
            }
            _ => {
                let alive_at_end =
                    r.end_time > t_end || (r.end_time >= t_end && matches!(r.end_cause, EndCause::Horizon));
                if alive_at_end {
                    let region = classify_exit(b, t_end, &r.path.position_at(t_end))?;
                    counts.m[region.index()] += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Earliest copy by rescanning every candidate after each event instant.
pub fn detect_copy_full_scan(
    log: &EventLog,
    n: i32,
    need: u64,
    t0: f64,
    t1: f64,
    candidates: &Region,
) -> Option<(f64, Site)> {
    let mut at: HashMap<&ParticleId, Site> = HashMap::new();
    let mut counts: HashMap<Site, u64> = HashMap::new();
    let scan = |counts: &HashMap<Site, u64>| {
        candidates.sites().into_iter().find(|x| {
            Region::cube(*x, n)
                .sites()
                .iter()
                .all(|s| counts.get(s).copied().unwrap_or(0) >= need)
        })
    };
    let mut i = 0;
    let ev = &log.events;
    let mut opened = false;
    while i < ev.len() {
        let time = ev[i].time;
        if !opened && time > t0 {
            opened = true;
            if let Some(x) = scan(&counts) {
                return Some((t0, x));
            }
        }
        if time >= t1 {
            break;
        }
        while i < ev.len() && ev[i].time == time {
            let e = &ev[i];
            match e.kind {
                EventKind::Start | EventKind::Birth => {
                    at.insert(&e.particle, e.site);
                    *counts.entry(e.site).or_default() += 1;
                }
                EventKind::Jump => {
                    if let Some(old) = at.insert(&e.particle, e.site) {
                        *counts.get_mut(&old).expect("occupied") -= 1;
                    }
                    *counts.entry(e.site).or_default() += 1;
                }
                EventKind::Branch | EventKind::Disaster | EventKind::Exit => {
                    if let Some(old) = at.remove(&e.particle) {
                        *counts.get_mut(&old).expect("occupied") -= 1;
                    }
                }
            }
            i += 1;
        }
        if time >= t0 {
            opened = true;
            if let Some(x) = scan(&counts) {
                return Some((time, x));
            }
        }
    }
    if !opened && t0 <= log.end_time {
        return scan(&counts).map(|x| (t0, x));
    }
    None
}

/// Outcome of one exact verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub detail: String,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::from_ratio(n, d)
}

/// Random weight vector with rational entries `c_i / Σc`, `c_i ∈ 1..=20`.
pub fn random_rational_weights<R: Rng + ?Sized>(bins: usize, rng: &mut R) -> WeightVector<BigRational> {
    let c: Vec<i64> = (0..bins).map(|_| rng.random_range(1..=20)).collect();
    let total: i64 = c.iter().sum();
    WeightVector::new(c.iter().map(|&x| q(x, total)).collect()).expect("valid weights")
}

/// Random pmf on `{0,1}^{m+1}` with rational masses.
pub fn random_rational_pmf<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<BigRational> {
    let len = 1 << (m + 1);
    let sparse = rng.random_bool(0.3);
    let c: Vec<i64> = (0..len)
        .map(|_| {
            if sparse && rng.random_bool(0.5) {
                0
            } else {
                rng.random_range(0..=12)
            }
        })
        .collect();
    let total: i64 = c.iter().sum::<i64>().max(1);
    let mut v: Vec<BigRational> = c.iter().map(|&x| q(x, total)).collect();
    if c.iter().all(|&x| x == 0) {
        v[0] = q(1, 1);
    }
    v
}

/// Closed-form parity law against the pmf sum on a grid of `n` and `p`.
pub fn suite_parity_closed_form() -> SuiteOutcome {
    let mut failures = 0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n in 0..=30u64 {
        for j in 0..=20 {
            let p = j as f64 * 0.05;
            let err = (orders::binom_parity_even(n, p) - binom_parity_even_pmf(n, p)).abs();
            worst = worst.max(err);
            cases += 1;
            if err > 1e-12 {
                failures += 1;
            }
        }
    }
    SuiteOutcome {
        name: "parity-closed-form",
        cases,
        failures,
        detail: format!("max abs error {worst:.3e}"),
    }
}

/// Dynamic program against enumeration, exact arithmetic.
pub fn suite_parity_dp(seed_: u64) -> SuiteOutcome {
    let mut rng = seed::rng_from(seed::derive(seed_, "parity-dp", 0));
    let (mut cases, mut failures) = (0, 0);
    for bins in 2..=5 {
        for k in (0..=6).step_by(2) {
            for _ in 0..5 {
                let w = random_rational_weights(bins, &mut rng);
                cases += 1;
                if orders::parity_dist(&w, k).expect("even k") != parity_dist_enumerate(&w, k) {
                    failures += 1;
                }
            }
        }
    }
    SuiteOutcome {
        name: "parity-dp-vs-enumeration",
        cases,
        failures,
        detail: String::new(),
    }
}

/// Monotonicity of the even-ball parity law in the prefix order.
pub fn suite_parity_monotone(seed_: u64, n_vectors: usize) -> SuiteOutcome {
    let mut rng = seed::rng_from(seed::derive(seed_, "parity-monotone", 0));
    let (mut cases, mut failures) = (0, 0);
    for bins in 2..=5 {
        for _ in 0..n_vectors {
            let w = random_rational_weights(bins, &mut rng);
            for k in 0..=3 {
                cases += 1;
                failures += orders::parity_order_violations(&w, k).expect("exact regime").len() as u64;
            }
        }
    }
    SuiteOutcome {
        name: "parity-order-monotone",
        cases,
        failures,
        detail: "violating pairs counted as failures".into(),
    }
}

/// Exact ratio bound for the discrete walk, all `k <= l <= 40`.
pub fn suite_walk_ratio() -> SuiteOutcome {
    let (mut cases, mut failures) = (0, 0);
    for l in 0..=40u64 {
        for k in 0..=l {
            if (l - k) % 2 != 0 {
                continue;
            }
            for x1 in -(k as i64)..=(k as i64) {
                if (k as i64 - x1).rem_euclid(2) != 0 {
                    continue;
                }
                cases += 1;
                if !orders::walk_ratio_bound(k, l, x1).expect("valid arguments") {
                    failures += 1;
                }
            }
        }
    }
    SuiteOutcome {
        name: "walk-ratio-bound",
        cases,
        failures,
        detail: String::new(),
    }
}

/// Likelihood ratio and CDF comparisons of the jump-count laws.
pub fn suite_lr_order() -> SuiteOutcome {
    let (mut cases, mut failures) = (0, 0);
    let mut detail = String::new();
    for kappa in [0.5, 1.0, 4.0] {
        for x1 in [0i64, 2] {
            cases += 1;
            match orders::lr_order_check(kappa, x1, 60) {
                Ok(c) if c.lr_holds && c.cdf_dominates => {}
                Ok(_) => failures += 1,
                Err(e) => {
                    failures += 1;
                    detail.push_str(&format!("rate {kappa} x1 {x1}: {e}; "));
                }
            }
        }
    }
    SuiteOutcome {
        name: "jump-count-lr-order",
        cases,
        failures,
        detail,
    }
}

/// The zero-product bound on random joint laws, exact arithmetic.
pub fn suite_zero_product(seed_: u64, n_laws: usize) -> SuiteOutcome {
    let mut rng = seed::rng_from(seed::derive(seed_, "zero-product", 0));
    let (mut cases, mut failures) = (0, 0);
    for i in 0..n_laws {
        let m = 1 + i % 5;
        let s = 1 + (i / 5) % 4;
        let joint = random_rational_pmf(m, &mut rng);
        cases += 1;
        if !zero_product_bound_check(&joint, s as u64).expect("valid law").holds {
            failures += 1;
        }
    }
    let mut tight = 0;
    for m in 1..=5 {
        for s in 1..=4 {
            let r = zero_product_bound_check(&zero_product_extremal::<BigRational>(m), s).expect("valid law");
            cases += 1;
            if r.slack != q(0, 1) {
                failures += 1;
            } else {
                tight += 1;
            }
        }
    }
    SuiteOutcome {
        name: "zero-product-bound",
        cases,
        failures,
        detail: format!("{tight} extremal laws with zero slack"),
    }
}

/// Majorization against the hinge-function and T-transform characterizations.
pub fn suite_majorization(seed_: u64, n_pairs: usize) -> SuiteOutcome {
    let mut rng = seed::rng_from(seed::derive(seed_, "majorization", 0));
    let (mut cases, mut failures) = (0, 0);
    for i in 0..n_pairs {
        let n = 1 + i % 3;
        let mk = |rng: &mut rand::rngs::SmallRng| {
            let len = 1 << n;
            let c: Vec<i64> = (0..len).map(|_| rng.random_range(0..=6)).collect();
            let total = c.iter().sum::<i64>().max(1);
            let mut v: Vec<BigRational> = c.iter().map(|&x| q(x, total)).collect();
            if c.iter().all(|&x| x == 0) {
                v[0] = q(1, 1);
            }
            DistOnSigma::new(n, v).expect("valid law")
        };
        let (mu, nu) = (mk(&mut rng), mk(&mut rng));
        let m = orders::majorization_leq(&mu, &nu).expect("same size");
        let hinge = orders::convex_hinge_check(mu.probs(), nu.probs());
        let path = orders::t_transform_path(mu.probs(), nu.probs()).is_some();
        let power = orders::power_family_check(&mu.to_f64(), &nu.to_f64());
        cases += 1;
        if m != hinge || m != path || (m && !power) {
            failures += 1;
        }
    }
    SuiteOutcome {
        name: "majorization-characterizations",
        cases,
        failures,
        detail: String::new(),
    }
}

/// Every exact suite, in a fixed order.
pub fn verify_suites(seed_: u64) -> Vec<SuiteOutcome> {
    vec![
        suite_parity_closed_form(),
        suite_parity_dp(seed_),
        suite_parity_monotone(seed_, 100),
        suite_walk_ratio(),
        suite_lr_order(),
        suite_zero_product(seed_, 10_000),
        suite_majorization(seed_, 500),
    ]
}
