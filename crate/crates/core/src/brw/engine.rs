//! Event-driven simulation of one realization of the particle system.
//!
//! A single priority queue holds every pending event: one jump-or-branch
//! clock per particle and one disaster per occupied site. Stale entries are
//! skipped by version stamps. Each particle draws from its own generator,
//! keyed by its genealogical path, so runs that differ only in truncation,
//! observers or caps share every random choice of the particles they have
//! in common.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::rngs::SmallRng;
use rand::Rng;
use rand_distr::Exp1;
use rustc_hash::FxHashMap;

use super::log::{Event, EventKind, EventLog};
use super::{AliveParticle, BrwParams, Configuration, EndCause, ParticleId, ParticleRecord, Snapshot};
use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::lattice::{Region, Site};
use crate::seed;
use crate::walk::WalkPath;

/// Population and work limits. A run that hits one stops and is flagged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Caps {
    pub max_alive: u64,
    pub max_events: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_alive: 1_000_000,
            max_events: 100_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapKind {
    Alive,
    Events,
}

/// Which side of an event time a snapshot sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFlavor {
    /// Events strictly before `t` applied: a disaster at exactly `t` has not struck yet.
    LeftLimit,
    /// Events at or before `t` applied.
    AtTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordLevel {
    None,
    /// Keep a [`ParticleRecord`] per particle.
    Records,
    /// Records plus the full event log.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub start_time: f64,
    pub horizon: f64,
    /// Particles are removed the instant they jump out of this region;
    /// particles starting outside it are removed at the start.
    pub truncation: Option<Region>,
    pub caps: Caps,
    pub snapshot_times: Vec<f64>,
    pub flavor: SnapshotFlavor,
    /// List every alive particle in snapshots, not only the total.
    pub full_snapshots: bool,
    pub record: RecordLevel,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        SimOptions {
            start_time: 0.0,
            horizon,
            truncation: None,
            caps: Caps::default(),
            snapshot_times: Vec::new(),
            flavor: SnapshotFlavor::LeftLimit,
            full_snapshots: false,
            record: RecordLevel::None,
        }
    }

    pub fn starting_at(mut self, t: f64) -> Self {
        self.start_time = t;
        self
    }

    pub fn truncated(mut self, region: Region) -> Self {
        self.truncation = Some(region);
        self
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn max_alive(mut self, n: u64) -> Self {
        self.caps.max_alive = n;
        self
    }

    pub fn snapshots(mut self, times: &[f64], flavor: SnapshotFlavor, full: bool) -> Self {
        self.snapshot_times = times.to_vec();
        self.flavor = flavor;
        self.full_snapshots = full;
        self
    }

    pub fn recording(mut self, level: RecordLevel) -> Self {
        self.record = level;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    /// In the order of the requested times; shorter if the run was stopped early.
    pub snapshots: Vec<Snapshot>,
    pub log: Option<EventLog>,
    pub records: Vec<ParticleRecord>,
    pub cap: Option<CapKind>,
    pub events: u64,
    /// Time of the last processed event, or the horizon if the run reached it.
    pub end_time: f64,
    /// Time at which the population hit zero.
    pub extinct_at: Option<f64>,
    /// Time at which an observer stopped the run.
    pub stopped_at: Option<f64>,
    pub alive_at_end: u64,
    /// State when the run ended (full listing only with `full_snapshots`).
    pub final_state: Snapshot,
}

impl SimResult {
    pub fn capped(&self) -> bool {
        self.cap.is_some()
    }
}

/// Hooks into a running simulation.
pub trait Observer {
    /// The number of particles at `site` changed to `count`.
    fn on_count(&mut self, _time: f64, _site: &Site, _count: u64) {}

    /// Called after the start and after each event; returning `true` stops the run.
    fn after_event(&mut self, _time: f64) -> bool {
        false
    }
}

pub struct NoObserver;

impl Observer for NoObserver {}

const RANK_DISASTER: u8 = 0;
const RANK_BRANCH: u8 = 1;
const RANK_JUMP: u8 = 2;

#[derive(Clone, Copy)]
enum Target {
    Particle { slot: usize, version: u32 },
    Site { site: Site, epoch: u64 },
}

struct Pending {
    time: f64,
    rank: u8,
    seq: u64,
    target: Target,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Particle {
    id: ParticleId,
    key: u64,
    rng: SmallRng,
    site: Site,
    birth_time: f64,
    birth_site: Site,
    threshold: f64,
    next_jump: f64,
    next_branch: f64,
    version: u32,
    alive: bool,
    jumps: Vec<(f64, Site)>,
}

struct SiteState {
    members: Vec<usize>,
    epoch: u64,
}

struct Engine<'a, O: Observer + ?Sized> {
    params: &'a BrwParams,
    env: &'a mut Environment,
    opts: &'a SimOptions,
    observer: &'a mut O,
    queue: BinaryHeap<Pending>,
    seq: u64,
    epoch: u64,
    particles: Vec<Particle>,
    free: Vec<usize>,
    sites: FxHashMap<Site, SiteState>,
    alive: u64,
    log: Vec<Event>,
    records: Vec<ParticleRecord>,
}

#[inline]
fn exp_gap(rng: &mut SmallRng, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / rate
    } else {
        f64::INFINITY
    }
}

impl<O: Observer + ?Sized> Engine<'_, O> {
    fn push(&mut self, time: f64, rank: u8, target: Target) {
        self.seq += 1;
        self.queue.push(Pending {
            time,
            rank,
            seq: self.seq,
            target,
        });
    }

    fn log_event(&mut self, time: f64, kind: EventKind, slot: usize, site: Site) {
        if self.opts.record == RecordLevel::Full {
            self.log.push(Event {
                time,
                kind,
                particle: self.particles[slot].id.clone(),
                site,
            });
        }
    }

    fn schedule_own(&mut self, slot: usize) {
        let p = &mut self.particles[slot];
        p.version = p.version.wrapping_add(1);
        let (time, rank) = if p.next_branch <= p.next_jump {
            (p.next_branch, RANK_BRANCH)
        } else {
            (p.next_jump, RANK_JUMP)
        };
        if time <= self.opts.horizon {
            let version = p.version;
            self.push(time, rank, Target::Particle { slot, version });
        }
    }

    fn enter_site(&mut self, slot: usize, site: Site, time: f64) {
        let count = match self.sites.get_mut(&site) {
            Some(st) => {
                st.members.push(slot);
                st.members.len()
            }
            None => {
                self.epoch += 1;
                let epoch = self.epoch;
                self.sites.insert(
                    site,
                    SiteState {
                        members: vec![slot],
                        epoch,
                    },
                );
                let s = self.env.next_at_or_after(&site, time);
                if s <= self.opts.horizon {
                    self.push(s, RANK_DISASTER, Target::Site { site, epoch });
                }
                1
            }
        };
        self.observer.on_count(time, &site, count as u64);
    }

    fn leave_site(&mut self, slot: usize, site: Site, time: f64) {
        let st = self.sites.get_mut(&site).expect("occupied site");
        let pos = st.members.iter().position(|&m| m == slot).expect("member");
        st.members.swap_remove(pos);
        let count = st.members.len();
        if count == 0 {
            self.sites.remove(&site);
        }
        self.observer.on_count(time, &site, count as u64);
    }

    fn new_particle(&mut self, id: ParticleId, key: u64, site: Site, time: f64, threshold: f64) -> usize {
        let mut rng = seed::rng_from(key);
        let next_jump = time + exp_gap(&mut rng, self.params.kappa);
        let next_branch = time + exp_gap(&mut rng, self.params.lambda);
        let p = Particle {
            id,
            key,
            rng,
            site,
            birth_time: time,
            birth_site: site,
            threshold,
            next_jump,
            next_branch,
            version: 0,
            alive: true,
            jumps: Vec::new(),
        };
        self.alive += 1;
        match self.free.pop() {
            Some(slot) => {
                let v = self.particles[slot].version;
                self.particles[slot] = p;
                self.particles[slot].version = v;
                slot
            }
            None => {
                self.particles.push(p);
                self.particles.len() - 1
            }
        }
    }

    fn retire(&mut self, slot: usize, time: f64, cause: EndCause) {
        let p = &mut self.particles[slot];
        p.alive = false;
        p.version = p.version.wrapping_add(1);
        self.alive -= 1;
        if self.opts.record != RecordLevel::None {
            let jumps = std::mem::take(&mut p.jumps);
            self.records.push(ParticleRecord {
                id: p.id.clone(),
                birth_time: p.birth_time,
                end_time: time,
                end_cause: cause,
                path: WalkPath {
                    start_site: p.birth_site,
                    start_time: p.birth_time,
                    jumps,
                    horizon: time,
                },
            });
        }
        self.free.push(slot);
    }

    fn snapshot(&self, time: f64, flavor: SnapshotFlavor, full: bool) -> Snapshot {
        let mut alive = Vec::new();
        if full {
            alive = self
                .particles
                .iter()
                .filter(|p| p.alive)
                .map(|p| AliveParticle {
                    id: p.id.clone(),
                    site: p.site,
                    threshold: p.threshold,
                })
                .collect();
            alive.sort_by(|a, b| a.id.cmp(&b.id));
        }
        Snapshot {
            time,
            flavor,
            total: self.alive,
            alive,
        }
    }

    fn disaster(&mut self, time: f64, site: Site, epoch: u64) {
        let members = match self.sites.get(&site) {
            Some(st) if st.epoch == epoch => st.members.clone(),
            _ => return,
        };
        let mut members = members;
        members.sort_by(|&a, &b| self.particles[a].id.cmp(&self.particles[b].id));
        self.sites.remove(&site);
        for slot in members {
            self.log_event(time, EventKind::Disaster, slot, site);
            self.retire(slot, time, EndCause::Disaster);
        }
        self.observer.on_count(time, &site, 0);
    }

    fn jump(&mut self, time: f64, slot: usize) {
        let d = self.params.d;
        let (from, to) = {
            let p = &mut self.particles[slot];
            let dir = p.rng.random_range(0..2 * d);
            let to = p.site.neighbor(dir);
            p.next_jump = time + exp_gap(&mut p.rng, self.params.kappa);
            (p.site, to)
        };
        self.leave_site(slot, from, time);
        if let Some(region) = &self.opts.truncation {
            if !region.contains(&to) {
                self.log_event(time, EventKind::Exit, slot, to);
                self.particles[slot].site = to;
                if self.opts.record != RecordLevel::None {
                    self.particles[slot].jumps.push((time, to));
                }
                self.retire(slot, time, EndCause::LeftRegion);
                return;
            }
        }
        {
            let p = &mut self.particles[slot];
            p.site = to;
            if self.opts.record != RecordLevel::None {
                p.jumps.push((time, to));
            }
        }
        self.log_event(time, EventKind::Jump, slot, to);
        self.enter_site(slot, to, time);
        self.schedule_own(slot);
    }

    fn branch(&mut self, time: f64, slot: usize) {
        let (k, mark, key, threshold, site, id) = {
            let p = &mut self.particles[slot];
            let k = self.params.sample_offspring(&mut p.rng);
            let u: f64 = p.rng.random();
            (k, u * self.params.lambda, p.key, p.threshold, p.site, p.id.clone())
        };
        self.log_event(time, EventKind::Branch, slot, site);
        // swap the parent for its children in one step so observers never see a transient count
        let st = self.sites.get_mut(&site).expect("occupied site");
        let pos = st.members.iter().position(|&m| m == slot).expect("member");
        st.members.swap_remove(pos);
        if st.members.is_empty() && k == 0 {
            self.sites.remove(&site);
        }
        self.retire(slot, time, EndCause::Branch);
        let mut children = Vec::with_capacity(k);
        for j in 0..k {
            let thr = if j == 0 { threshold } else { threshold.max(mark) };
            let child = self.new_particle(id.child(j as u32), seed::combine(key, j as u64), site, time, thr);
            self.log_event(time, EventKind::Birth, child, site);
            children.push(child);
        }
        let count = match self.sites.get_mut(&site) {
            Some(st) => {
                st.members.extend_from_slice(&children);
                st.members.len()
            }
            None => 0,
        };
        for child in children {
            self.schedule_own(child);
        }
        self.observer.on_count(time, &site, count as u64);
    }
}

fn validate(params: &BrwParams, eta0: &Configuration, env: &Environment, opts: &SimOptions) -> Result<()> {
    if env.dimension() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            found: env.dimension(),
        });
    }
    if let Some(d) = eta0.dim() {
        if d != params.d {
            return Err(Error::DimensionMismatch {
                expected: params.d,
                found: d,
            });
        }
    }
    if let Some(r) = &opts.truncation {
        if r.dim() != params.d {
            return Err(Error::DimensionMismatch {
                expected: params.d,
                found: r.dim(),
            });
        }
    }
    if !(opts.start_time.is_finite() && opts.horizon >= opts.start_time) {
        return Err(Error::InvalidWindow {
            t0: opts.start_time,
            t1: opts.horizon,
        });
    }
    let mut prev = f64::NEG_INFINITY;
    for &t in &opts.snapshot_times {
        if t < opts.start_time || t > opts.horizon || t < prev {
            return Err(invalid(
                "snapshot_times",
                "must be nondecreasing and within [start_time, horizon]",
            ));
        }
        prev = t;
    }
    Ok(())
}

/// Run the process from `eta0` at `opts.start_time` in the environment `env`.
/// `key` seeds the genealogy: the `i`-th starting particle (in site order)
/// draws from `hash(key, i)`.
pub fn simulate(
    params: &BrwParams,
    eta0: &Configuration,
    env: &mut Environment,
    key: u64,
    opts: &SimOptions,
) -> Result<SimResult> {
    simulate_observed(params, eta0, env, key, opts, &mut NoObserver)
}

pub fn simulate_observed<O: Observer + ?Sized>(
    params: &BrwParams,
    eta0: &Configuration,
    env: &mut Environment,
    key: u64,
    opts: &SimOptions,
    observer: &mut O,
) -> Result<SimResult> {
    validate(params, eta0, env, opts)?;
    let mut e = Engine {
        params,
        env,
        opts,
        observer,
        queue: BinaryHeap::new(),
        seq: 0,
        epoch: 0,
        particles: Vec::new(),
        free: Vec::new(),
        sites: FxHashMap::default(),
        alive: 0,
        log: Vec::new(),
        records: Vec::new(),
    };
    let t0 = opts.start_time;
    let mut index = 0u32;
    for (site, &count) in eta0.iter() {
        for _ in 0..count {
            let slot = e.new_particle(
                ParticleId::root(index),
                seed::combine(key, index as u64),
                *site,
                t0,
                0.0,
            );
            index += 1;
            e.log_event(t0, EventKind::Start, slot, *site);
            if opts.truncation.as_ref().is_some_and(|r| !r.contains(site)) {
                e.log_event(t0, EventKind::Exit, slot, *site);
                e.retire(slot, t0, EndCause::LeftRegion);
                continue;
            }
            e.enter_site(slot, *site, t0);
            e.schedule_own(slot);
        }
    }

    let mut snapshots = Vec::with_capacity(opts.snapshot_times.len());
    let mut next_snap = 0;
    let mut cap = None;
    let mut events = 0u64;
    let mut end_time = opts.horizon;
    let mut extinct_at = if e.alive == 0 { Some(t0) } else { None };
    let mut stopped_at = None;

    if e.observer.after_event(t0) {
        stopped_at = Some(t0);
        end_time = t0;
    } else if e.alive > opts.caps.max_alive {
        cap = Some(CapKind::Alive);
        end_time = t0;
    } else {
        while e.alive > 0 {
            let Some(ev) = e.queue.pop() else { break };
            if ev.time > opts.horizon {
                break;
            }
            // snapshots that precede this event
            while next_snap < opts.snapshot_times.len() {
                let t = opts.snapshot_times[next_snap];
                let before = match opts.flavor {
                    SnapshotFlavor::LeftLimit => t <= ev.time,
                    SnapshotFlavor::AtTime => t < ev.time,
                };
                if !before {
                    break;
                }
                snapshots.push(e.snapshot(t, opts.flavor, opts.full_snapshots));
                next_snap += 1;
            }
            let applied = match ev.target {
                Target::Site { site, epoch } => {
                    e.disaster(ev.time, site, epoch);
                    true
                }
                Target::Particle { slot, version } => {
                    let p = &e.particles[slot];
                    if !p.alive || p.version != version {
                        false
                    } else {
                        if ev.rank == RANK_BRANCH {
                            e.branch(ev.time, slot);
                        } else {
                            e.jump(ev.time, slot);
                        }
                        true
                    }
                }
            };
            if !applied {
                continue;
            }
            events += 1;
            if e.alive == 0 {
                extinct_at = Some(ev.time);
            }
            if e.observer.after_event(ev.time) {
                stopped_at = Some(ev.time);
                end_time = ev.time;
                break;
            }
            if e.alive > opts.caps.max_alive {
                cap = Some(CapKind::Alive);
                end_time = ev.time;
                break;
            }
            if events >= opts.caps.max_events {
                cap = Some(CapKind::Events);
                end_time = ev.time;
                break;
            }
        }
    }
    if cap.is_none() && stopped_at.is_none() {
        while next_snap < opts.snapshot_times.len() {
            let t = opts.snapshot_times[next_snap];
            snapshots.push(e.snapshot(t, opts.flavor, opts.full_snapshots));
            next_snap += 1;
        }
    }
    let final_state = e.snapshot(end_time, SnapshotFlavor::AtTime, opts.full_snapshots);
    let alive_at_end = e.alive;
    if opts.record != RecordLevel::None {
        let cause = if cap.is_some() {
            EndCause::Cap
        } else {
            EndCause::Horizon
        };
        let slots: Vec<usize> = (0..e.particles.len()).filter(|&s| e.particles[s].alive).collect();
        for slot in slots {
            e.retire(slot, end_time, cause);
        }
        e.records.sort_by(|a, b| a.id.cmp(&b.id));
    }
    let log = (opts.record == RecordLevel::Full).then(|| EventLog {
        dim: params.d,
        start_time: t0,
        end_time,
        events: std::mem::take(&mut e.log),
    });
    Ok(SimResult {
        snapshots,
        log,
        records: e.records,
        cap,
        events,
        end_time,
        extinct_at,
        stopped_at,
        alive_at_end,
        final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brw::{dominates, site_counts};
    use crate::env::DisasterField;
    use crate::walk::{extinction_time, simulate_walk};

    fn origin1() -> Configuration {
        Configuration::single(Site::d1(0), 1)
    }

    #[test]
    fn no_branching_reduces_to_the_walk() {
        let field = DisasterField::new(42, 1.0, 1).unwrap();
        for key in 0..50u64 {
            let params = BrwParams::new(1.5, 0.0, vec![0.0, 0.0, 1.0], 1.0, 1).unwrap();
            let mut env = field.environment();
            let opts = SimOptions::new(10.0).recording(RecordLevel::Records);
            let res = simulate(&params, &origin1(), &mut env, key, &opts).unwrap();
            let mut rng = seed::rng_from(seed::combine(key, 0));
            let path = simulate_walk(1.5, 1, 10.0, &mut rng).unwrap();
            let tau = extinction_time(&path, &mut env).unwrap();
            assert_eq!(res.extinct_at, tau, "key {key}");
            let rec = &res.records[0];
            assert_eq!(rec.path.jumps[..], path.jumps[..rec.path.jumps.len()]);
        }
    }

    #[test]
    fn sterile_offspring_dies_out() {
        let params = BrwParams::new(1.0, 2.0, vec![1.0], 0.0, 1).unwrap();
        let mut env = DisasterField::new(1, 0.0, 1).unwrap().environment();
        let res = simulate(&params, &origin1(), &mut env, 3, &SimOptions::new(100.0)).unwrap();
        assert!(res.extinct_at.unwrap() < 100.0);
        assert_eq!(res.alive_at_end, 0);
    }

    #[test]
    fn disaster_clears_the_site() {
        // frozen particles: all sit at the origin until the first disaster there
        let params = BrwParams::binary(0.0, 1.0, 0.5, 1).unwrap();
        let field = DisasterField::new(9, 0.5, 1).unwrap();
        let mut env = field.environment();
        let first = env.next_after(&Site::d1(0), 0.0);
        let opts = SimOptions::new(first + 1.0).recording(RecordLevel::Full);
        let res = simulate(&params, &Configuration::single(Site::d1(0), 3), &mut env, 5, &opts).unwrap();
        assert_eq!(res.extinct_at, Some(first));
        let log = res.log.unwrap();
        let last = log.events.last().unwrap();
        assert_eq!(last.kind, EventKind::Disaster);
        assert_eq!(last.time, first);
    }

    #[test]
    fn snapshot_flavors_straddle_a_disaster() {
        let params = BrwParams::binary(0.0, 0.0, 1.0, 1).unwrap();
        let field = DisasterField::new(3, 1.0, 1).unwrap();
        let first = field.environment().next_after(&Site::d1(0), 0.0);
        for (flavor, want) in [(SnapshotFlavor::LeftLimit, 1), (SnapshotFlavor::AtTime, 0)] {
            let opts = SimOptions::new(first + 1.0).snapshots(&[first], flavor, true);
            let res = simulate(&params, &origin1(), &mut field.environment(), 1, &opts).unwrap();
            assert_eq!(res.snapshots[0].total, want, "{flavor:?}");
        }
    }

    #[test]
    fn truncation_removes_particles_on_exit() {
        let params = BrwParams::binary(2.0, 0.5, 0.0, 1).unwrap();
        let field = DisasterField::new(3, 0.0, 1).unwrap();
        let region = Region::cube(Site::d1(0), 2);
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let full = SimOptions::new(10.0).snapshots(&times, SnapshotFlavor::LeftLimit, true);
        let trunc = full.clone().truncated(region);
        let a = simulate(&params, &origin1(), &mut field.environment(), 7, &full).unwrap();
        let b = simulate(&params, &origin1(), &mut field.environment(), 7, &trunc).unwrap();
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            assert!(sb.total <= sa.total);
            assert!(sb.alive.iter().all(|p| region.contains(&p.site)));
            assert!(sb
                .alive
                .iter()
                .all(|p| sa.alive.iter().any(|q| q.id == p.id && q.site == p.site)));
        }
    }

    #[test]
    fn cap_trips_flag_the_run() {
        let params = BrwParams::binary(1.0, 3.0, 0.0, 1).unwrap();
        let mut env = DisasterField::new(3, 0.0, 1).unwrap().environment();
        let opts = SimOptions::new(50.0).max_alive(100);
        let res = simulate(&params, &origin1(), &mut env, 1, &opts).unwrap();
        assert_eq!(res.cap, Some(CapKind::Alive));
        assert!(res.alive_at_end > 100);
        let opts = SimOptions::new(50.0).with_caps(Caps {
            max_alive: u64::MAX,
            max_events: 10,
        });
        let res = simulate(&params, &origin1(), &mut env, 1, &opts).unwrap();
        assert_eq!(res.cap, Some(CapKind::Events));
        assert_eq!(res.events, 10);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let params = BrwParams::binary(1.0, 1.0, 1.0, 2).unwrap();
        let mut env = DisasterField::new(3, 1.0, 1).unwrap().environment();
        assert!(simulate(&params, &origin1(), &mut env, 1, &SimOptions::new(1.0)).is_err());
    }

    #[test]
    fn snapshot_reflexive_domination() {
        let params = BrwParams::binary(1.0, 1.0, 0.3, 1).unwrap();
        let mut env = DisasterField::new(3, 0.3, 1).unwrap().environment();
        let opts = SimOptions::new(3.0).snapshots(&[3.0], SnapshotFlavor::LeftLimit, true);
        let res = simulate(&params, &origin1(), &mut env, 11, &opts).unwrap();
        let snap = &res.snapshots[0];
        let eta = site_counts(snap);
        assert_eq!(eta.total(), snap.total);
        assert!(dominates(snap, &eta));
        let first = eta.support().next().copied();
        if let Some(s) = first {
            let mut more = eta.clone();
            more.add(s, 1);
            assert!(!dominates(snap, &more));
        }
    }

    #[test]
    fn observer_can_stop_the_run() {
        struct StopAt(u64, u64);
        impl Observer for StopAt {
            fn on_count(&mut self, _t: f64, _s: &Site, c: u64) {
                self.1 = self.1.max(c);
            }
            fn after_event(&mut self, _t: f64) -> bool {
                self.1 >= self.0
            }
        }
        let params = BrwParams::binary(0.0, 1.0, 0.0, 1).unwrap();
        let mut env = DisasterField::new(3, 0.0, 1).unwrap().environment();
        let mut obs = StopAt(4, 0);
        let res = simulate_observed(&params, &origin1(), &mut env, 1, &SimOptions::new(100.0), &mut obs).unwrap();
        assert!(res.stopped_at.is_some());
        assert_eq!(res.alive_at_end, 4);
    }
}
