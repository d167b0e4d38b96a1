//! The branching random walk among disasters.
//!
//! Particles jump at rate `kappa` to a uniform nearest neighbor, branch at
//! rate `lambda` into a `q`-distributed number of children at their site, and
//! all particles at a site die together when a disaster of the environment
//! strikes it.

mod analysis;
mod engine;
mod log;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Region, Site, MAX_DIM};

pub use analysis::{
    coupled_survival, growth_rate, lambda_coupled_counts, moment_identity_check, population_tail_fractions,
    survival_curve, survival_frequency, GrowthEstimate, MomentCheck, SurvivalFrequency,
};
pub use engine::{
    simulate, simulate_observed, CapKind, Caps, NoObserver, Observer, RecordLevel, SimOptions, SimResult,
    SnapshotFlavor,
};
pub use log::{parse_event_log, replay_counts, write_event_log, Event, EventKind, EventLog};

/// Largest offspring number a law may charge.
pub const MAX_OFFSPRING: usize = 64;

/// Model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BrwParams {
    pub kappa: f64,
    pub lambda: f64,
    /// `q[k]` is the probability of `k` children.
    q: Vec<f64>,
    cdf: Vec<f64>,
    pub alpha: f64,
    pub d: usize,
}

impl BrwParams {
    pub fn new(kappa: f64, lambda: f64, q: Vec<f64>, alpha: f64, d: usize) -> Result<Self> {
        for (name, x) in [("kappa", kappa), ("lambda", lambda), ("alpha", alpha)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if q.is_empty() || q.len() > MAX_OFFSPRING + 1 {
            return Err(Error::InvalidOffspring(format!(
                "support must be within 0..={MAX_OFFSPRING}, got {} entries",
                q.len()
            )));
        }
        if q.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidOffspring("negative or non-finite mass".into()));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidOffspring(format!("masses sum to {total}, not 1")));
        }
        if q.len() > 1 && q[1] >= 1.0 {
            return Err(Error::InvalidOffspring("q(1) must be < 1".into()));
        }
        let mut acc = 0.0;
        let cdf = q
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(BrwParams {
            kappa,
            lambda,
            q,
            cdf,
            alpha,
            d,
        })
    }

    /// Binary branching `q = δ_2`.
    pub fn binary(kappa: f64, lambda: f64, alpha: f64, d: usize) -> Result<Self> {
        BrwParams::new(kappa, lambda, vec![0.0, 0.0, 1.0], alpha, d)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q0(&self) -> f64 {
        self.q[0]
    }

    /// Mean offspring number `m`.
    pub fn mean_offspring(&self) -> f64 {
        self.q.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `lambda (m - 1)`, the exponential growth rate of the mean population without disasters.
    pub fn malthus(&self) -> f64 {
        self.lambda * (self.mean_offspring() - 1.0)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        BrwParams::new(self.kappa, lambda, self.q.clone(), self.alpha, self.d)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        BrwParams::new(self.kappa, self.lambda, self.q.clone(), alpha, self.d)
    }

    pub(crate) fn sample_offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.q.len() - 1)
    }
}

/// Finitely supported particle counts on the lattice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Configuration {
    counts: BTreeMap<Site, u64>,
}

impl Configuration {
    pub fn new() -> Self {
        Configuration::default()
    }

    pub fn single(site: Site, count: u64) -> Self {
        let mut c = Configuration::new();
        c.add(site, count);
        c
    }

    /// `R` particles on every site of `A`.
    pub fn uniform<'a>(sites: impl IntoIterator<Item = &'a Site>, r: u64) -> Self {
        let mut c = Configuration::new();
        for s in sites {
            c.set(*s, r);
        }
        c
    }

    pub fn on_region(region: &Region, r: u64) -> Self {
        Configuration::uniform(region.sites().iter(), r)
    }

    pub fn get(&self, site: &Site) -> u64 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn set(&mut self, site: Site, count: u64) {
        if count == 0 {
            self.counts.remove(&site);
        } else {
            self.counts.insert(site, count);
        }
    }

    pub fn add(&mut self, site: Site, count: u64) {
        let c = self.get(&site) + count;
        self.set(site, c);
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Nonzero entries in site order.
    pub fn iter(&self) -> impl Iterator<Item = (&Site, &u64)> {
        self.counts.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Site> {
        self.counts.keys()
    }

    /// Every count multiplied by `s`.
    pub fn scaled(&self, s: u64) -> Self {
        let mut c = Configuration::new();
        for (site, &n) in &self.counts {
            c.set(*site, n * s);
        }
        c
    }

    pub fn translated(&self, by: &Site) -> Self {
        let mut c = Configuration::new();
        for (site, &n) in &self.counts {
            c.set(site.offset(by), n);
        }
        c
    }

    /// `eta_x <= self_x` for every site.
    pub fn dominates(&self, eta: &Configuration) -> bool {
        eta.iter().all(|(s, &n)| self.get(s) >= n)
    }

    pub(crate) fn dim(&self) -> Option<usize> {
        self.counts.keys().next().map(|s| s.dim())
    }
}

/// Child-index path of a particle in the genealogical tree: the first entry is
/// the index of the ancestor in the starting configuration.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ParticleId(pub Vec<u32>);

impl ParticleId {
    pub fn root(i: u32) -> Self {
        ParticleId(vec![i])
    }

    pub fn child(&self, j: u32) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(j);
        ParticleId(v)
    }

    pub fn parent(&self) -> Option<ParticleId> {
        if self.0.len() <= 1 {
            None
        } else {
            Some(ParticleId(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn is_ancestor_of(&self, other: &ParticleId) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl fmt::Display for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParticleId({self})")
    }
}

impl std::str::FromStr for ParticleId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split('.')
            .map(|p| p.parse::<u32>().map_err(|e| format!("bad particle id `{s}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ParticleId)
    }
}

/// Why a particle stopped being tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndCause {
    Branch,
    Disaster,
    LeftRegion,
    /// Still alive when the run ended (horizon reached or stopped by an observer).
    Horizon,
    Cap,
}

/// Life of one particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleRecord {
    pub id: ParticleId,
    pub birth_time: f64,
    pub end_time: f64,
    pub end_cause: EndCause,
    /// Birth site and jumps; `horizon` is the end time.
    pub path: crate::walk::WalkPath,
}

/// A living particle in a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct AliveParticle {
    pub id: ParticleId,
    pub site: Site,
    /// Thinning mark used by the monotone coupling in the branching rate.
    pub threshold: f64,
}

/// State of the system at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub flavor: SnapshotFlavor,
    pub total: u64,
    /// Empty unless full snapshots were requested.
    pub alive: Vec<AliveParticle>,
}

impl Snapshot {
    /// Number of particles that belong to the process with branching rate `lambda`.
    pub fn count_below(&self, lambda: f64) -> u64 {
        self.alive.iter().filter(|p| p.threshold < lambda).count() as u64
    }
}

/// Tally of alive particles by site.
pub fn site_counts(snapshot: &Snapshot) -> Configuration {
    let mut c = Configuration::new();
    for p in &snapshot.alive {
        c.add(p.site, 1);
    }
    c
}

/// `eta_x <= |Z(t) ∩ {x}|` for every site `x`.
pub fn dominates(snapshot: &Snapshot, eta: &Configuration) -> bool {
    site_counts(snapshot).dominates(eta)
}
