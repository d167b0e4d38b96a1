//! Oriented site percolation read off the branching process, and an
//! independent percolation to compare it with.
//!
//! Rows `k = 0, 1, ...` of the lattice hold points `(k, l)` with `l <= k`. The
//! point `(k, l)` is occupied when, at some time in `[5Tk, 5T(k+1))`, a
//! translate `x + D_n` of `D_n = {-n, ..., n}^d` with every site holding at
//! least `S²` particles sits at some `x` with
//! `x_1 ∈ {L(-2k+4l-1), ..., L(-2k+4l+1)}` and `x_j ∈ {-L, ..., L}` otherwise.
//! A point is open when an oriented path of occupied points leads to it from
//! `(0, 0)`; steps go from `(k, l)` to `(k+1, l)` or `(k+1, l+1)`.
//!
//! Two constructions are offered. [`Construction::Direct`] uses one run from
//! `(D_n, S²)` and applies the definition as stated. [`Construction::Truncated`]
//! builds row `k+1` from restarts: the point `(k+1, l)` is attempted from the
//! copy found for an open predecessor and the restarted process is confined to
//! a spatial window around the target, so the bits of one row depend on
//! disjoint parts of the environment once they are more than two apart.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::brw::{
    simulate, simulate_observed, BrwParams, Caps, Configuration, EventKind, EventLog, Observer, SimOptions,
};
use crate::env::DisasterField;
use crate::error::{invalid, Error, Result};
use crate::lattice::{Region, Site};
use crate::seed;
use crate::stats::{self, Estimate};
use crate::walk::SurvivalEstimate;

/// Finite piece `{(k, l) : k <= K, l <= k}` of the oriented lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PercLattice {
    pub occupied: Vec<Vec<bool>>,
    pub open: Vec<Vec<bool>>,
    /// Rows in which some run hit a cap; their bits are lower bounds.
    pub flagged: Vec<bool>,
}

/// Open bits from occupancy: `(0, 0)` is open, and `(k, l)` is open iff it is
/// occupied and `(k-1, l)` or `(k-1, l-1)` is open.
pub fn open_closure(occupied: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let mut open: Vec<Vec<bool>> = Vec::with_capacity(occupied.len());
    for (k, row) in occupied.iter().enumerate() {
        let r = if k == 0 {
            vec![true]
        } else {
            let prev = &open[k - 1];
            (0..=k)
                .map(|l| row[l] && (prev.get(l).copied().unwrap_or(false) || (l > 0 && prev[l - 1])))
                .collect()
        };
        open.push(r);
    }
    open
}

impl PercLattice {
    pub fn from_occupied(occupied: Vec<Vec<bool>>) -> Self {
        let open = open_closure(&occupied);
        let flagged = vec![false; occupied.len()];
        PercLattice {
            occupied,
            open,
            flagged,
        }
    }

    /// Index of the last row.
    pub fn last_row(&self) -> usize {
        self.open.len() - 1
    }

    pub fn reaches(&self, k: usize) -> bool {
        self.open.get(k).is_some_and(|r| r.iter().any(|&b| b))
    }

    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    /// One `k,l,occupied,open` record per point.
    pub fn dump(&self) -> String {
        let mut s = String::from("k,l,occupied,open\n");
        for (k, row) in self.occupied.iter().enumerate() {
            for (l, &occ) in row.iter().enumerate() {
                s.push_str(&format!("{k},{l},{},{}\n", occ as u8, self.open[k][l] as u8));
            }
        }
        s
    }
}

/// Occupancy uniforms for one independent percolation realization.
pub fn uniform_field<R: Rng + ?Sized>(rows: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..=rows).map(|k| (0..=k).map(|_| rng.random()).collect()).collect()
}

/// Points other than `(0, 0)` occupied iff their uniform is below `p`.
pub fn lattice_from_uniforms(u: &[Vec<f64>], p: f64) -> PercLattice {
    let occ = u
        .iter()
        .enumerate()
        .map(|(k, row)| row.iter().map(|&x| k == 0 || x < p).collect())
        .collect();
    PercLattice::from_occupied(occ)
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid("p", "must lie in [0, 1]"))
    }
}

/// Survival to row `rows` at each `p`, from the same uniforms for every `p`.
pub fn independent_perc_curve(ps: &[f64], rows: usize, n_reps: u64, seed_: u64) -> Result<Vec<SurvivalEstimate>> {
    for &p in ps {
        check_p(p)?;
    }
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let hits: Vec<Vec<bool>> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let u = uniform_field(rows, &mut seed::rng_from(seed::derive(seed_, "perc", i)));
            ps.iter().map(|&p| lattice_from_uniforms(&u, p).reaches(rows)).collect()
        })
        .collect();
    Ok((0..ps.len())
        .map(|j| SurvivalEstimate::from_counts(hits.iter().filter(|h| h[j]).count() as u64, n_reps))
        .collect())
}

/// Frequency of an open point in row `rows` for independent site percolation.
pub fn independent_perc(p: f64, rows: usize, n_reps: u64, seed_: u64) -> Result<SurvivalEstimate> {
    Ok(independent_perc_curve(&[p], rows, n_reps, seed_)?[0])
}

/// Parameters of the block construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PercConfig {
    pub l: i32,
    pub t: f64,
    pub n: i32,
    /// Each site of a copy needs `s * s` particles.
    pub s: u64,
    /// Index of the last row built.
    pub rows: usize,
    pub construction: Construction,
    pub caps: Caps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Direct,
    Truncated,
}

impl PercConfig {
    pub fn new(l: i32, t: f64, n: i32, s: u64, rows: usize, construction: Construction) -> Result<Self> {
        if l < 1 {
            return Err(invalid("L", "must be >= 1"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("T", "must be finite and > 0"));
        }
        if n < 0 {
            return Err(invalid("n", "must be >= 0"));
        }
        if s < 1 {
            return Err(invalid("S", "must be >= 1"));
        }
        if construction == Construction::Truncated && n > 2 * l {
            return Err(invalid("n", "the truncated construction needs n <= 2L"));
        }
        Ok(PercConfig {
            l,
            t,
            n,
            s,
            rows,
            construction,
            caps: Caps {
                max_alive: 200_000,
                max_events: 50_000_000,
            },
        })
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn threshold(&self) -> u64 {
        self.s * self.s
    }

    /// Time window `[5Tk, 5T(k+1))` of row `k`.
    pub fn window(&self, k: usize) -> (f64, f64) {
        (5.0 * self.t * k as f64, 5.0 * self.t * (k as f64 + 1.0))
    }

    fn center(&self, k: usize, l: usize) -> i32 {
        self.l * (4 * l as i32 - 2 * k as i32)
    }

    /// Sites `x` whose copy `x + D_n` occupies `(k, l)`.
    pub fn target(&self, k: usize, l: usize, d: usize) -> Region {
        let c = self.center(k, l);
        let mut lo = Site::origin(d).with_coord(0, c - self.l);
        let mut hi = Site::origin(d).with_coord(0, c + self.l);
        for j in 1..d {
            lo = lo.with_coord(j, -self.l);
            hi = hi.with_coord(j, self.l);
        }
        Region { lo, hi }
    }

    /// Spatial confinement of the restart aimed at `(k, l)`.
    pub fn restart_region(&self, k: usize, l: usize, d: usize) -> Region {
        let c = self.center(k, l);
        let mut lo = Site::origin(d).with_coord(0, c - 5 * self.l);
        let mut hi = Site::origin(d).with_coord(0, c + 5 * self.l);
        for j in 1..d {
            lo = lo.with_coord(j, -3 * self.l);
            hi = hi.with_coord(j, 3 * self.l);
        }
        Region { lo, hi }
    }
}

/// `(x + D_n, R)`.
pub fn copy_configuration(x: &Site, n: i32, r: u64) -> Configuration {
    Configuration::on_region(&Region::cube(*x, n), r)
}

#[derive(Clone, Debug)]
struct Target {
    region: Region,
    t0: f64,
    t1: f64,
    scanned: bool,
    found: Option<(f64, Site)>,
}

/// Watches site counts and records, for each target, the earliest time and
/// the first site `x` (lexicographic) at which `x + D_n` is fully occupied.
#[derive(Clone, Debug)]
pub struct CopyDetector {
    n: i32,
    need: u64,
    counts: HashMap<Site, u64>,
    targets: Vec<Target>,
    fresh: Vec<Site>,
    stop_when_all_found: bool,
}

impl CopyDetector {
    pub fn new(n: i32, need: u64) -> Self {
        CopyDetector {
            n,
            need,
            counts: HashMap::new(),
            targets: Vec::new(),
            fresh: Vec::new(),
            stop_when_all_found: false,
        }
    }

    /// Add a target window `[t0, t1)` and candidate set; returns its index.
    pub fn watch(&mut self, region: Region, t0: f64, t1: f64) -> usize {
        self.targets.push(Target {
            region,
            t0,
            t1,
            scanned: false,
            found: None,
        });
        self.targets.len() - 1
    }

    pub fn stop_when_all_found(mut self) -> Self {
        self.stop_when_all_found = true;
        self
    }

    pub fn found(&self, i: usize) -> Option<(f64, Site)> {
        self.targets[i].found
    }

    fn full_at(&self, x: &Site) -> bool {
        Region::cube(*x, self.n)
            .sites()
            .iter()
            .all(|s| self.counts.get(s).copied().unwrap_or(0) >= self.need)
    }

    /// Scan targets whose window opened before `time` with the current state,
    /// which is the state at their opening time.
    fn advance(&mut self, time: f64) {
        for i in 0..self.targets.len() {
            let t = &self.targets[i];
            if t.scanned || t.t0 >= time {
                continue;
            }
            self.targets[i].scanned = true;
            if self.targets[i].found.is_some() {
                continue;
            }
            let (region, t0) = (self.targets[i].region, self.targets[i].t0);
            if let Some(x) = region.sites().into_iter().find(|x| self.full_at(x)) {
                self.targets[i].found = Some((t0, x));
            }
        }
    }

    fn check_fresh(&mut self, time: f64) {
        if self.fresh.is_empty() {
            return;
        }
        let fresh = std::mem::take(&mut self.fresh);
        for i in 0..self.targets.len() {
            let t = &self.targets[i];
            if t.found.is_some() || time < t.t0 || time >= t.t1 {
                continue;
            }
            let region = t.region;
            let mut best: Option<Site> = None;
            for s in &fresh {
                for x in Region::cube(*s, self.n).sites() {
                    if region.contains(&x) && best.is_none_or(|b| x < b) && self.full_at(&x) {
                        best = Some(x);
                    }
                }
            }
            if let Some(x) = best {
                self.targets[i].found = Some((time, x));
            }
        }
    }

    /// Settle targets after the run ended at `end`: a target that opened
    /// after the last event sees the final state.
    pub fn finish(&mut self, end: f64) {
        for i in 0..self.targets.len() {
            if self.targets[i].scanned || self.targets[i].t0 > end {
                continue;
            }
            self.targets[i].scanned = true;
            if self.targets[i].found.is_none() {
                let (region, t0) = (self.targets[i].region, self.targets[i].t0);
                if let Some(x) = region.sites().into_iter().find(|x| self.full_at(x)) {
                    self.targets[i].found = Some((t0, x));
                }
            }
        }
    }

    fn set_count(&mut self, time: f64, site: &Site, count: u64) {
        self.advance(time);
        let old = if count == 0 {
            self.counts.remove(site).unwrap_or(0)
        } else {
            self.counts.insert(*site, count).unwrap_or(0)
        };
        if old < self.need && count >= self.need {
            self.fresh.push(*site);
        }
    }

    fn settled(&self, time: f64) -> bool {
        self.targets
            .iter()
            .all(|t| t.found.is_some() || (t.scanned && time >= t.t1))
    }
}

impl Observer for CopyDetector {
    fn on_count(&mut self, time: f64, site: &Site, count: u64) {
        self.set_count(time, site, count);
    }

    fn after_event(&mut self, time: f64) -> bool {
        self.advance(time);
        self.check_fresh(time);
        self.stop_when_all_found && self.settled(time)
    }
}

/// Earliest `(t, x)` with `t ∈ [t0, t1)`, `x ∈ candidates` and every site of
/// `x + D_n` holding at least `need` particles, found by replaying a log.
pub fn detect_occupied_copy(
    log: &EventLog,
    n: i32,
    need: u64,
    t0: f64,
    t1: f64,
    candidates: &Region,
) -> Option<(f64, Site)> {
    let mut det = CopyDetector::new(n, need);
    det.watch(*candidates, t0, t1);
    let mut counts: HashMap<Site, u64> = HashMap::new();
    let mut at: HashMap<&crate::brw::ParticleId, Site> = HashMap::new();
    let events = &log.events;
    let mut i = 0;
    while i < events.len() {
        let time = events[i].time;
        // apply every event at this instant before looking
        let mut touched: Vec<Site> = Vec::new();
        while i < events.len() && events[i].time == time {
            let e = &events[i];
            match e.kind {
                EventKind::Start | EventKind::Birth => {
                    at.insert(&e.particle, e.site);
                    *counts.entry(e.site).or_default() += 1;
                    touched.push(e.site);
                }
                EventKind::Jump => {
                    if let Some(old) = at.insert(&e.particle, e.site) {
                        *counts.get_mut(&old).expect("occupied") -= 1;
                        touched.push(old);
                    }
                    *counts.entry(e.site).or_default() += 1;
                    touched.push(e.site);
                }
                EventKind::Branch | EventKind::Disaster | EventKind::Exit => {
                    if let Some(old) = at.remove(&e.particle) {
                        *counts.get_mut(&old).expect("occupied") -= 1;
                        touched.push(old);
                    }
                }
            }
            i += 1;
        }
        touched.sort();
        touched.dedup();
        for s in &touched {
            det.on_count(time, s, counts.get(s).copied().unwrap_or(0));
        }
        det.after_event(time);
    }
    det.finish(log.end_time);
    det.found(0)
}

fn start_config(cfg: &PercConfig, d: usize) -> Configuration {
    copy_configuration(&Site::origin(d), cfg.n, cfg.threshold())
}

/// Percolation lattice induced by the process started from `(D_n, S²)` at time 0.
pub fn build_eta_from_brw(
    params: &BrwParams,
    field: &DisasterField,
    key: u64,
    cfg: &PercConfig,
) -> Result<PercLattice> {
    if field.dimension() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            found: field.dimension(),
        });
    }
    match cfg.construction {
        Construction::Direct => build_direct(params, field, key, cfg),
        Construction::Truncated => build_truncated(params, field, key, cfg),
    }
}

fn build_direct(params: &BrwParams, field: &DisasterField, key: u64, cfg: &PercConfig) -> Result<PercLattice> {
    let d = params.d;
    let mut det = CopyDetector::new(cfg.n, cfg.threshold());
    let mut index = Vec::new();
    for k in 0..=cfg.rows {
        let (t0, t1) = cfg.window(k);
        for l in 0..=k {
            index.push((k, l, det.watch(cfg.target(k, l, d), t0, t1)));
        }
    }
    let horizon = cfg.window(cfg.rows).1;
    let mut env = field.environment();
    let opts = SimOptions::new(horizon).with_caps(cfg.caps);
    let res = simulate_observed(params, &start_config(cfg, d), &mut env, key, &opts, &mut det)?;
    det.finish(res.end_time);
    let mut occ: Vec<Vec<bool>> = (0..=cfg.rows).map(|k| vec![false; k + 1]).collect();
    for (k, l, i) in index {
        occ[k][l] = det.found(i).is_some();
    }
    let mut lat = PercLattice::from_occupied(occ);
    if res.capped() {
        let first = (0..=cfg.rows)
            .find(|&k| cfg.window(k).1 > res.end_time)
            .unwrap_or(cfg.rows);
        for f in &mut lat.flagged[first..] {
            *f = true;
        }
    }
    Ok(lat)
}

fn build_truncated(params: &BrwParams, field: &DisasterField, key: u64, cfg: &PercConfig) -> Result<PercLattice> {
    let d = params.d;
    let mut env = field.environment();
    let need = cfg.threshold();
    let mut occ: Vec<Vec<bool>> = vec![vec![true]];
    let mut flagged = vec![false];
    // copy found for each open point of the previous row
    let mut copies: Vec<Option<(f64, Site)>> = vec![Some((0.0, Site::origin(d)))];
    for k in 1..=cfg.rows {
        let (t0, t1) = cfg.window(k);
        let mut row = vec![false; k + 1];
        let mut next = vec![None; k + 1];
        let mut row_flag = false;
        for l in 0..=k {
            let pred = copies
                .get(l)
                .copied()
                .flatten()
                .or_else(|| if l > 0 { copies[l - 1] } else { None });
            let Some((ts, xs)) = pred else { continue };
            let mut det = CopyDetector::new(cfg.n, need).stop_when_all_found();
            det.watch(cfg.target(k, l, d), t0, t1);
            let opts = SimOptions::new(t1)
                .starting_at(ts)
                .truncated(cfg.restart_region(k, l, d))
                .with_caps(cfg.caps);
            let sub_key = seed::derive(key, "restart", (k * (k + 1) / 2 + l) as u64);
            let res = simulate_observed(
                params,
                &copy_configuration(&xs, cfg.n, need),
                &mut env,
                sub_key,
                &opts,
                &mut det,
            )?;
            det.finish(res.end_time);
            row_flag |= res.capped();
            if let Some(c) = det.found(0) {
                row[l] = true;
                next[l] = Some(c);
            }
        }
        occ.push(row);
        flagged.push(row_flag);
        copies = next;
    }
    let mut lat = PercLattice::from_occupied(occ);
    lat.flagged = flagged;
    Ok(lat)
}

/// Replica `i` of a block construction: fresh field and tree from `hash(seed, i)`.
pub fn brw_lattice(params: &BrwParams, cfg: &PercConfig, seed_: u64, i: u64) -> Result<PercLattice> {
    let field = DisasterField::new(seed::derive(seed_, "perc-field", i), params.alpha, params.d)?;
    build_eta_from_brw(params, &field, seed::derive(seed_, "perc-tree", i), cfg)
}

/// Frequency of an open point in the last row over replicas, and the number
/// of replicas with a flagged row.
pub fn brw_perc_survival(
    params: &BrwParams,
    cfg: &PercConfig,
    n_reps: u64,
    seed_: u64,
) -> Result<(SurvivalEstimate, u64)> {
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let lats = (0..n_reps)
        .into_par_iter()
        .map(|i| brw_lattice(params, cfg, seed_, i))
        .collect::<Result<Vec<_>>>()?;
    let alive = lats.iter().filter(|l| l.reaches(cfg.rows)).count() as u64;
    let flagged = lats.iter().filter(|l| l.any_flagged()).count() as u64;
    Ok((SurvivalEstimate::from_counts(alive, n_reps), flagged))
}

/// Correlation of two bits of one row across replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCorrelation {
    pub l1: usize,
    pub l2: usize,
    pub corr: Estimate,
    /// One of the bits never varied; the correlation is reported as 0.
    pub degenerate: bool,
}

/// Correlations between all pairs of positions in `rows` (one bit vector per
/// replica) that are more than `min_gap` apart.
pub fn row_correlations(rows: &[Vec<bool>], min_gap: usize) -> Vec<PairCorrelation> {
    let width = rows.first().map_or(0, |r| r.len());
    let col = |l: usize| rows.iter().map(|r| r[l] as u8 as f64).collect::<Vec<f64>>();
    let mut out = Vec::new();
    for l1 in 0..width {
        for l2 in l1 + min_gap + 1..width {
            let (a, b) = (col(l1), col(l2));
            let (sa, sb) = (stats::std_dev(&a), stats::std_dev(&b));
            if !(sa > 0.0 && sb > 0.0) {
                out.push(PairCorrelation {
                    l1,
                    l2,
                    corr: Estimate::new(0.0, 0.0),
                    degenerate: true,
                });
                continue;
            }
            let cov = stats::covariance_estimate(&a, &b);
            // population standard deviations to match the covariance normalization
            let n = a.len() as f64;
            let k = (n - 1.0) / n;
            let denom = sa * sb * k;
            out.push(PairCorrelation {
                l1,
                l2,
                corr: Estimate::new(cov.value / denom, cov.std_err / denom),
                degenerate: false,
            });
        }
    }
    out
}

/// Correlations between occupancy bits of one row at horizontal distance
/// greater than 2.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceProbe {
    /// Over replicas in which every point of rows `1..row` is open. A point
    /// can only be occupied through a copy in the row below, so unconditioned
    /// bits share that history; given fully open earlier rows every point has
    /// its predecessor.
    pub conditional: Vec<PairCorrelation>,
    pub n_conditioned: u64,
    /// Over all replicas.
    pub unconditional: Vec<PairCorrelation>,
    pub n_reps: u64,
    pub n_flagged: u64,
}

pub fn dependence_range_probe(
    params: &BrwParams,
    cfg: &PercConfig,
    row: usize,
    n_reps: u64,
    seed_: u64,
) -> Result<DependenceProbe> {
    if row == 0 || row > cfg.rows {
        return Err(invalid("row", "must lie in 1..=rows"));
    }
    let lats = (0..n_reps)
        .into_par_iter()
        .map(|i| brw_lattice(params, cfg, seed_, i))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Vec<bool>> = lats.iter().map(|l| l.occupied[row].clone()).collect();
    let cond: Vec<Vec<bool>> = lats
        .iter()
        .filter(|l| l.open[1..row].iter().flatten().all(|&b| b))
        .map(|l| l.occupied[row].clone())
        .collect();
    Ok(DependenceProbe {
        conditional: row_correlations(&cond, 2),
        n_conditioned: cond.len() as u64,
        unconditional: row_correlations(&all, 2),
        n_reps,
        n_flagged: lats.iter().filter(|l| l.any_flagged()).count() as u64,
    })
}

/// The same probe on independent percolation.
pub fn independent_dependence_probe(p: f64, row: usize, n_reps: u64, seed_: u64) -> Result<Vec<PairCorrelation>> {
    check_p(p)?;
    let rows: Vec<Vec<bool>> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let u = uniform_field(row, &mut seed::rng_from(seed::derive(seed_, "perc", i)));
            lattice_from_uniforms(&u, p).occupied[row].clone()
        })
        .collect();
    Ok(row_correlations(&rows, 2))
}

/// Runs of the process with a full log, used by the replay checks.
pub fn logged_run(
    params: &BrwParams,
    eta: &Configuration,
    field: &DisasterField,
    key: u64,
    horizon: f64,
) -> Result<EventLog> {
    let mut env = field.environment();
    let opts = SimOptions::new(horizon).recording(crate::brw::RecordLevel::Full);
    Ok(simulate(params, eta, &mut env, key, &opts)?
        .log
        .expect("full recording keeps the log"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_of_full_lattice_is_full() {
        let occ: Vec<Vec<bool>> = (0..6).map(|k| vec![true; k + 1]).collect();
        assert!(open_closure(&occ).iter().flatten().all(|&b| b));
    }

    #[test]
    fn closure_needs_a_path() {
        let mut occ: Vec<Vec<bool>> = (0..4).map(|k| vec![false; k + 1]).collect();
        occ[2][1] = true;
        occ[3][1] = true;
        let open = open_closure(&occ);
        assert!(open[0][0]);
        assert!(!open[2][1] && !open[3][1]);
        occ[1][0] = true;
        let open = open_closure(&occ);
        assert!(open[2][1] && open[3][1] && !open[3][2]);
    }

    #[test]
    fn extreme_probabilities() {
        assert_eq!(independent_perc(1.0, 20, 50, 1).unwrap().value, 1.0);
        assert_eq!(independent_perc(0.0, 1, 50, 1).unwrap().value, 0.0);
        assert!(independent_perc(1.5, 1, 50, 1).is_err());
    }

    #[test]
    fn geometry_of_targets() {
        let cfg = PercConfig::new(2, 1.0, 0, 1, 3, Construction::Direct).unwrap();
        let r = cfg.target(0, 0, 1);
        assert_eq!((r.lo.coord(0), r.hi.coord(0)), (-2, 2));
        let r = cfg.target(1, 1, 2);
        assert_eq!(
            (r.lo.coord(0), r.hi.coord(0), r.lo.coord(1), r.hi.coord(1)),
            (2, 6, -2, 2)
        );
        assert_eq!(cfg.window(2), (10.0, 15.0));
        assert!(PercConfig::new(1, 1.0, 3, 1, 3, Construction::Truncated).is_err());
    }

    #[test]
    fn copy_at_start_is_immediate() {
        let params = BrwParams::binary(1.0, 1.0, 1.0, 1).unwrap();
        let field = DisasterField::new(3, 1.0, 1).unwrap();
        let log = logged_run(&params, &Configuration::single(Site::origin(1), 1), &field, 5, 1.0).unwrap();
        let hit = detect_occupied_copy(&log, 0, 1, 0.0, 1.0, &Region::cube(Site::origin(1), 0));
        assert_eq!(hit, Some((0.0, Site::origin(1))));
    }

    #[test]
    fn dead_process_occupies_nothing() {
        let params = BrwParams::new(1.0, 5.0, vec![1.0], 1.0, 1).unwrap();
        let field = DisasterField::new(3, 1.0, 1).unwrap();
        for c in [Construction::Direct, Construction::Truncated] {
            let cfg = PercConfig::new(1, 0.5, 0, 1, 4, c).unwrap();
            let lat = build_eta_from_brw(&params, &field, 9, &cfg).unwrap();
            assert!(lat.occupied[1..].iter().flatten().all(|&b| !b));
            assert!(lat.open[0][0]);
        }
    }
}
