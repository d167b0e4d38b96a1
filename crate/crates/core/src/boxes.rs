//! Space-time boxes `[0, T] × {-L, ..., L}^d`, their boundary orthants, and
//! the counts of particles leaving through them.
//!
//! The boundary is the top `{T} × {-L..L}^d` together with the faces
//! `‖x‖_∞ = L` at times in `[0, T)`; the bottom is not part of it. The top is
//! split by the sign of `x_1` and the faces by direction `±e_i`; both are then
//! split further by the signs of the remaining coordinates, with `sign(0) = 1`.
//!
//! `N` counts first hits of the faces along each line of descent: once a
//! particle or any of its ancestors has touched the boundary, nothing below it
//! counts again. `M` counts particles alive at `T` whose whole ancestry stayed
//! off the boundary before `T`; a particle that touched a face and came back
//! in is not counted.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::brw::{simulate, BrwParams, Caps, Configuration, EventKind, EventLog, ParticleId, RecordLevel, SimOptions};
use crate::env::DisasterField;
use crate::error::{invalid, Error, Result};
use crate::lattice::Site;
use crate::scalar::{self, Scalar};
use crate::seed;
use crate::stats::{self, Estimate};

/// `[t0, t0 + T] × (x0 + {-L, ..., L}^d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeBox {
    pub l: i32,
    pub t: f64,
    pub d: usize,
    pub origin_time: f64,
    pub origin_site: Site,
}

fn sign(x: i32) -> i8 {
    if x >= 0 {
        1
    } else {
        -1
    }
}

impl SpaceTimeBox {
    pub fn new(l: i32, t: f64, d: usize) -> Result<Self> {
        Self::with_origin(l, t, 0.0, Site::origin(d))
    }

    pub fn with_origin(l: i32, t: f64, origin_time: f64, origin_site: Site) -> Result<Self> {
        if l < 1 {
            return Err(invalid("L", "must be >= 1"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("T", "must be finite and > 0"));
        }
        if !origin_time.is_finite() {
            return Err(invalid("origin_time", "must be finite"));
        }
        Ok(SpaceTimeBox {
            l,
            t,
            d: origin_site.dim(),
            origin_time,
            origin_site,
        })
    }

    pub fn end_time(&self) -> f64 {
        self.origin_time + self.t
    }

    fn local(&self, x: &Site) -> Vec<i32> {
        x.coords()
            .iter()
            .zip(self.origin_site.coords())
            .map(|(a, b)| a - b)
            .collect()
    }

    fn norm(&self, x: &Site) -> i32 {
        self.local(x).iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// `‖x - x0‖_∞ < L`.
    pub fn contains_strictly(&self, x: &Site) -> bool {
        self.norm(x) < self.l
    }

    fn on_face(&self, x: &Site) -> bool {
        self.norm(x) == self.l
    }

    pub fn n_top_regions(&self) -> usize {
        1 << self.d
    }

    pub fn n_face_regions(&self) -> usize {
        self.d << self.d
    }
}

/// One orthant of the top or of a face.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExitRegion {
    /// `u` is the sign of `x_1`; `theta` the signs of `x_2, ..., x_d`.
    Top { u: i8, theta: Vec<i8> },
    /// Face in direction `dir · e_axis` (`axis` counted from 0); `theta` the
    /// signs of the other coordinates in increasing order.
    Face { axis: usize, dir: i8, theta: Vec<i8> },
}

fn theta_bits(theta: &[i8]) -> usize {
    theta
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &s)| acc | ((s < 0) as usize) << j)
}

fn bits_theta(bits: usize, len: usize) -> Vec<i8> {
    (0..len).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect()
}

impl ExitRegion {
    /// Position in [`ExitCounts::m`] (tops) or [`ExitCounts::n`] (faces).
    pub fn index(&self) -> usize {
        match self {
            ExitRegion::Top { u, theta } => (*u < 0) as usize | theta_bits(theta) << 1,
            ExitRegion::Face { axis, dir, theta } => {
                let per_axis = 1 << (theta.len() + 1);
                axis * per_axis + ((*dir < 0) as usize | theta_bits(theta) << 1)
            }
        }
    }

    pub fn top_from_index(i: usize, d: usize) -> Self {
        ExitRegion::Top {
            u: if i & 1 == 1 { -1 } else { 1 },
            theta: bits_theta(i >> 1, d - 1),
        }
    }

    pub fn face_from_index(i: usize, d: usize) -> Self {
        let per_axis = 1 << d;
        let r = i % per_axis;
        ExitRegion::Face {
            axis: i / per_axis,
            dir: if r & 1 == 1 { -1 } else { 1 },
            theta: bits_theta(r >> 1, d - 1),
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, ExitRegion::Top { .. })
    }
}

/// Which boundary orthant contains `(t, x)`.
pub fn classify_exit(b: &SpaceTimeBox, t: f64, x: &Site) -> Result<ExitRegion> {
    if x.dim() != b.d {
        return Err(Error::DimensionMismatch {
            expected: b.d,
            found: x.dim(),
        });
    }
    let y = b.local(x);
    let norm = y.iter().map(|c| c.abs()).max().unwrap_or(0);
    let tau = t - b.origin_time;
    let at_top = (tau - b.t).abs() <= 1e-12 * b.t.max(1.0);
    if at_top && norm <= b.l {
        return Ok(ExitRegion::Top {
            u: sign(y[0]),
            theta: y[1..].iter().map(|&c| sign(c)).collect(),
        });
    }
    if tau >= 0.0 && tau < b.t && norm == b.l {
        let axis = y
            .iter()
            .position(|c| c.abs() == b.l)
            .expect("a coordinate attains the norm");
        let theta = y
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != axis)
            .map(|(_, &c)| sign(c))
            .collect();
        return Ok(ExitRegion::Face {
            axis,
            dir: sign(y[axis]),
            theta,
        });
    }
    Err(Error::NotOnBoundary(format!("({t}, {x})")))
}

/// Exit counts through the `2^d` top orthants and `d 2^d` face orthants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExitCounts {
    pub d: usize,
    pub m: Vec<u64>,
    pub n: Vec<u64>,
}

impl ExitCounts {
    pub fn zeros(d: usize) -> Self {
        ExitCounts {
            d,
            m: vec![0; 1 << d],
            n: vec![0; d << d],
        }
    }

    pub fn get(&self, r: &ExitRegion) -> u64 {
        if r.is_top() {
            self.m[r.index()]
        } else {
            self.n[r.index()]
        }
    }

    fn bump(&mut self, r: &ExitRegion) {
        if r.is_top() {
            self.m[r.index()] += 1;
        } else {
            self.n[r.index()] += 1;
        }
    }

    pub fn sum_m(&self) -> u64 {
        self.m.iter().sum()
    }

    pub fn sum_n(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// Count exits from the box in a run recorded by [`simulate`]. The log must
/// start at the box's base time, end no earlier than its top, and every
/// starting particle must lie strictly inside the box.
pub fn exit_counts(log: &EventLog, b: &SpaceTimeBox) -> Result<ExitCounts> {
    if log.dim != b.d {
        return Err(Error::DimensionMismatch {
            expected: b.d,
            found: log.dim,
        });
    }
    let tol = 1e-12 * b.end_time().abs().max(1.0);
    if (log.start_time - b.origin_time).abs() > tol || log.end_time < b.end_time() - tol {
        return Err(Error::LogCoverage {
            log_start: log.start_time,
            log_end: log.end_time,
            need_start: b.origin_time,
            need_end: b.end_time(),
        });
    }
    let mut counts = ExitCounts::zeros(b.d);
    // alive particle -> (site, lineage touched the boundary)
    let mut alive: HashMap<&ParticleId, (Site, bool)> = HashMap::new();
    let mut branched: HashMap<ParticleId, bool> = HashMap::new();
    let t_end = b.end_time();
    for e in &log.events {
        if e.time >= t_end {
            break;
        }
        match e.kind {
            EventKind::Start => {
                if !b.contains_strictly(&e.site) {
                    return Err(Error::Precondition(format!(
                        "starting particle {} at {} is not strictly inside the box",
                        e.particle, e.site
                    )));
                }
                alive.insert(&e.particle, (e.site, false));
            }
            EventKind::Birth => {
                let parent = e.particle.parent().expect("born particles have a parent");
                let flag = branched.get(&parent).copied().unwrap_or(true);
                alive.insert(&e.particle, (e.site, flag));
            }
            EventKind::Jump | EventKind::Exit => {
                let Some(entry) = alive.get_mut(&e.particle) else {
                    continue;
                };
                entry.0 = e.site;
                if !entry.1 && b.on_face(&e.site) {
                    entry.1 = true;
                    counts.bump(&classify_exit(b, e.time, &e.site)?);
                }
                if e.kind == EventKind::Exit {
                    alive.remove(&e.particle);
                }
            }
            EventKind::Branch => {
                if let Some((_, flag)) = alive.remove(&e.particle) {
                    branched.insert(e.particle.clone(), flag);
                }
            }
            EventKind::Disaster => {
                alive.remove(&e.particle);
            }
        }
    }
    for (site, flag) in alive.values() {
        if !flag {
            counts.bump(&classify_exit(b, t_end, site)?);
        }
    }
    Ok(counts)
}

/// Run one tree from `eta` through the box in the given field and count its exits.
/// Returns `None` if a cap stopped the run before the top of the box.
pub fn run_box(
    params: &BrwParams,
    eta: &Configuration,
    field: &DisasterField,
    key: u64,
    b: &SpaceTimeBox,
    caps: Caps,
) -> Result<Option<ExitCounts>> {
    if eta.is_empty() {
        return Ok(Some(ExitCounts::zeros(b.d)));
    }
    let mut env = field.environment();
    let opts = SimOptions::new(b.end_time())
        .starting_at(b.origin_time)
        .with_caps(caps)
        .recording(RecordLevel::Full);
    let res = simulate(params, eta, &mut env, key, &opts)?;
    if res.capped() {
        return Ok(None);
    }
    exit_counts(res.log.as_ref().expect("full recording keeps the log"), b).map(Some)
}

/// Nonnegative nondecreasing functionals of `(M, N)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Functional {
    Constant(f64),
    /// `ΣM + ΣN`.
    Total,
    SumM,
    SumN,
    /// `1{ΣM + ΣN >= k}`.
    TotalAtLeast(u64),
    /// One top orthant count.
    TopCount(usize),
    /// One face orthant count.
    FaceCount(usize),
    /// `1{M[i] >= k}`.
    TopAtLeast(usize, u64),
}

impl Functional {
    pub fn eval(&self, c: &ExitCounts) -> f64 {
        match *self {
            Functional::Constant(v) => v,
            Functional::Total => (c.sum_m() + c.sum_n()) as f64,
            Functional::SumM => c.sum_m() as f64,
            Functional::SumN => c.sum_n() as f64,
            Functional::TotalAtLeast(k) => ((c.sum_m() + c.sum_n()) >= k) as u8 as f64,
            Functional::TopCount(i) => c.m[i] as f64,
            Functional::FaceCount(i) => c.n[i] as f64,
            Functional::TopAtLeast(i, k) => (c.m[i] >= k) as u8 as f64,
        }
    }

    /// Linear sums, single orthants and threshold indicators on a box in dimension `d`.
    pub fn standard_suite(d: usize) -> Vec<(Functional, Functional)> {
        let mut v = vec![
            (Functional::Total, Functional::Total),
            (Functional::SumM, Functional::SumN),
            (Functional::SumN, Functional::SumM),
            (Functional::TotalAtLeast(1), Functional::TotalAtLeast(1)),
            (Functional::TotalAtLeast(3), Functional::Total),
        ];
        let tops = 1 << d;
        v.push((Functional::TopCount(0), Functional::TopCount(tops - 1)));
        v.push((Functional::FaceCount(0), Functional::TopCount(0)));
        v.push((Functional::TopAtLeast(0, 1), Functional::FaceCount((d << d) - 1)));
        v
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Functional::Constant(v) => write!(f, "const({v})"),
            Functional::Total => f.write_str("total"),
            Functional::SumM => f.write_str("sum_m"),
            Functional::SumN => f.write_str("sum_n"),
            Functional::TotalAtLeast(k) => write!(f, "total>={k}"),
            Functional::TopCount(i) => write!(f, "m[{i}]"),
            Functional::FaceCount(i) => write!(f, "n[{i}]"),
            Functional::TopAtLeast(i, k) => write!(f, "m[{i}]>={k}"),
        }
    }
}

/// Covariance of `f` on one tree and `g` on an independent tree sharing the environment.
#[derive(Clone, Debug, PartialEq)]
pub struct FkgEstimate {
    pub cov: Estimate,
    pub mean_f: f64,
    pub mean_g: f64,
    pub n_used: u64,
    pub n_capped: u64,
}

/// Replica exit counts for two independent trees from `eta1` and `eta2` in a
/// shared field per replica.
pub fn paired_exit_counts(
    params: &BrwParams,
    eta1: &Configuration,
    eta2: &Configuration,
    b: &SpaceTimeBox,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<(Vec<(ExitCounts, ExitCounts)>, u64)> {
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let field = DisasterField::new(seed::derive(seed_, "field", i), params.alpha, params.d)?;
            let a = run_box(params, eta1, &field, seed::derive(seed_, "tree1", i), b, caps)?;
            let c = run_box(params, eta2, &field, seed::derive(seed_, "tree2", i), b, caps)?;
            Ok(a.zip(c))
        })
        .collect::<Result<Vec<_>>>()?;
    let capped = rows.iter().filter(|r| r.is_none()).count() as u64;
    Ok((rows.into_iter().flatten().collect(), capped))
}

/// Estimate `E[f g] - E[f] E[g]`; nonnegative in expectation for nondecreasing
/// `f`, `g` (the caller's duty; not checked).
#[allow(clippy::too_many_arguments)]
pub fn fkg_test(
    params: &BrwParams,
    eta1: &Configuration,
    eta2: &Configuration,
    b: &SpaceTimeBox,
    f: &Functional,
    g: &Functional,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<FkgEstimate> {
    let (pairs, n_capped) = paired_exit_counts(params, eta1, eta2, b, n_reps, caps, seed_)?;
    Ok(fkg_from_pairs(&pairs, f, g, n_capped))
}

pub fn fkg_from_pairs(
    pairs: &[(ExitCounts, ExitCounts)],
    f: &Functional,
    g: &Functional,
    n_capped: u64,
) -> FkgEstimate {
    let fs: Vec<f64> = pairs.iter().map(|(a, _)| f.eval(a)).collect();
    let gs: Vec<f64> = pairs.iter().map(|(_, c)| g.eval(c)).collect();
    FkgEstimate {
        cov: stats::covariance_estimate(&fs, &gs),
        mean_f: stats::mean(&fs),
        mean_g: stats::mean(&gs),
        n_used: pairs.len() as u64,
        n_capped,
    }
}

/// Both sides of `∏ P(X_i = 0)^S <= P(X = 0) + (m/(m+1))^{(m+1)S}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroProductBound<T> {
    pub holds: bool,
    pub lhs: T,
    pub rhs: T,
    /// `rhs - lhs`.
    pub slack: T,
}

fn pow<T: Scalar>(x: T, n: u64) -> T {
    let mut acc = T::one();
    for _ in 0..n {
        acc = acc * x.clone();
    }
    acc
}

/// Exact check for a joint law of `(X_0, ..., X_m)` on `{0,1}^{m+1}`, given as
/// masses indexed by bitmask (bit `i` is `X_i`).
pub fn zero_product_bound_check<T: Scalar>(joint: &[T], s: u64) -> Result<ZeroProductBound<T>> {
    let len = joint.len();
    if len < 4 || !len.is_power_of_two() {
        return Err(Error::InvalidPmf(format!("need 2^(m+1) masses with m >= 1, got {len}")));
    }
    if s < 1 {
        return Err(invalid("S", "must be >= 1"));
    }
    if joint.iter().any(|p| *p < T::zero()) || !scalar::sum(joint).approx_eq(&T::one()) {
        return Err(Error::InvalidPmf("masses must be nonnegative and sum to 1".into()));
    }
    let k = len.trailing_zeros() as usize;
    let m = k - 1;
    let mut lhs = T::one();
    for i in 0..k {
        let zero_i = joint
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> i & 1 == 0)
            .fold(T::zero(), |acc, (_, p)| acc + p.clone());
        lhs = lhs * pow(zero_i, s);
    }
    let extra = pow(T::from_ratio(m as i64, k as i64), k as u64 * s);
    let rhs = joint[0].clone() + extra;
    let holds = lhs.approx_le(&rhs);
    Ok(ZeroProductBound {
        holds,
        slack: rhs.clone() - lhs.clone(),
        lhs,
        rhs,
    })
}

/// The law maximizing the left side for `P(X = 0) = 0`: exactly one `X_i`
/// equals 1, uniformly.
pub fn zero_product_extremal<T: Scalar>(m: usize) -> Vec<T> {
    let mut v = vec![T::zero(); 1 << (m + 1)];
    for i in 0..=m {
        v[1 << i] = T::from_ratio(1, m as i64 + 1);
    }
    v
}

/// One inequality of the S-fold comparison: `lhs <= rhs + additive`.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// The smaller additive term `|I|^{-|I| S}`; reported, not used for `violated`.
    pub additive_stated: f64,
    /// Additive term that the zero-product bound yields, `((|I|-1)/|I|)^{|I| S}`.
    pub additive_derived: f64,
    /// `lhs` exceeds `rhs + additive_derived` by more than 3 combined standard errors.
    pub violated: bool,
}

impl InequalityCheck {
    fn new(lhs: Estimate, rhs: Estimate, index_size: usize, s: u64) -> Self {
        let n = index_size as f64;
        let e = n * s as f64;
        let additive_stated = n.powf(-e);
        let additive_derived = ((n - 1.0) / n).powf(e);
        let se = (lhs.std_err.powi(2) + rhs.std_err.powi(2)).sqrt();
        InequalityCheck {
            violated: lhs.value > rhs.value + additive_derived + 3.0 * se,
            lhs,
            rhs,
            additive_stated,
            additive_derived,
        }
    }
}

/// Monte Carlo estimates for the three S-fold inequalities: top orthants,
/// face orthants, and the pair (ΣN, ΣM).
#[derive(Clone, Debug, PartialEq)]
pub struct SFoldReport {
    pub top: InequalityCheck,
    pub faces: InequalityCheck,
    pub totals: InequalityCheck,
    pub n_capped: u64,
}

impl SFoldReport {
    pub fn any_violated(&self) -> bool {
        self.top.violated || self.faces.violated || self.totals.violated
    }
}

/// Product of estimated probabilities with a delta-method error that treats
/// the factors as independent.
fn product_estimate(ps: &[Estimate]) -> Estimate {
    let value: f64 = ps.iter().map(|p| p.value).product();
    let rel: f64 = ps
        .iter()
        .map(|p| {
            if p.value > 0.0 {
                (p.std_err / p.value).powi(2)
            } else {
                0.0
            }
        })
        .sum();
    let se = if value > 0.0 {
        value * rel.sqrt()
    } else {
        ps.iter().map(|p| p.std_err).fold(0.0, f64::max)
    };
    Estimate::new(value, se)
}

fn frequency(rows: &[ExitCounts], pred: impl Fn(&ExitCounts) -> bool) -> Estimate {
    let hits = rows.iter().filter(|r| pred(r)).count() as u64;
    stats::proportion(hits, rows.len() as u64)
}

fn run_many(
    params: &BrwParams,
    eta: &Configuration,
    b: &SpaceTimeBox,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
    label: &str,
) -> Result<(Vec<ExitCounts>, u64)> {
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let field = DisasterField::new(
                seed::derive(seed_, &format!("{label}-field"), i),
                params.alpha,
                params.d,
            )?;
            run_box(
                params,
                eta,
                &field,
                seed::derive(seed_, &format!("{label}-tree"), i),
                b,
                caps,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let capped = rows.iter().filter(|r| r.is_none()).count() as u64;
    Ok((rows.into_iter().flatten().collect(), capped))
}

/// The left sides run from `S η`, the right sides from `η`, on independent replicas.
#[allow(clippy::too_many_arguments)]
pub fn sfold_exit_check(
    params: &BrwParams,
    eta: &Configuration,
    b: &SpaceTimeBox,
    k: u64,
    k_prime: u64,
    s: u64,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<SFoldReport> {
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let (big, c1) = run_many(params, &eta.scaled(s), b, n_reps, caps, seed_, "scaled")?;
    let (one, c2) = run_many(params, eta, b, n_reps, caps, seed_, "single")?;
    if big.is_empty() || one.is_empty() {
        return Err(Error::Precondition("every replica hit a cap".into()));
    }
    let tops = b.n_top_regions();
    let faces = b.n_face_regions();
    let top_lhs = product_estimate(&(0..tops).map(|i| frequency(&big, |r| r.m[i] <= k)).collect::<Vec<_>>());
    let top_rhs = frequency(&one, |r| r.sum_m() <= tops as u64 * k);
    let face_lhs = product_estimate(&(0..faces).map(|i| frequency(&big, |r| r.n[i] <= k)).collect::<Vec<_>>());
    let face_rhs = frequency(&one, |r| r.sum_n() <= faces as u64 * k);
    let tot_lhs = product_estimate(&[
        frequency(&big, |r| r.sum_n() <= k),
        frequency(&big, |r| r.sum_m() <= k_prime),
    ]);
    let tot_rhs = frequency(&one, |r| r.sum_m() + r.sum_n() <= k + k_prime);
    Ok(SFoldReport {
        top: InequalityCheck::new(top_lhs, top_rhs, tops, s),
        faces: InequalityCheck::new(face_lhs, face_rhs, faces, s),
        totals: InequalityCheck::new(tot_lhs, tot_rhs, 2, s),
        n_capped: c1 + c2,
    })
}
