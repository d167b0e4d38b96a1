//! The random environment: one Poisson stream of disasters per lattice site.
//!
//! A [`DisasterField`] is an immutable descriptor (seeds, rates, dimension)
//! and can be shared freely. Materialized streams live in an [`Environment`],
//! which owns a per-site cache and must stay inside a single worker.
//!
//! Streams are defined on `(0, inf)`. Windows are half-open `[t0, t1)`, so a
//! disaster exactly at `t1` belongs to the next window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rustc_hash::FxHashMap;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, MAX_DIM};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Component {
    seed: u64,
    rate: f64,
}

/// Descriptor of an environment: a superposition of independent Poisson
/// fields, each keyed by its own seed.
#[derive(Clone, Debug, PartialEq)]
pub struct DisasterField {
    components: Vec<Component>,
    dim: usize,
}

impl DisasterField {
    pub fn new(seed: u64, rate: f64, dim: usize) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("must be finite and >= 0, got {rate}")));
        }
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(DisasterField {
            components: vec![Component { seed, rate }],
            dim,
        })
    }

    /// Total disaster rate per site.
    pub fn rate(&self) -> f64 {
        self.components.iter().map(|c| c.rate).sum()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// The field containing the disasters of both inputs.
    pub fn superpose(&self, other: &DisasterField) -> Result<DisasterField> {
        superpose(self, other)
    }

    /// Fresh per-worker cache over this field.
    pub fn environment(&self) -> Environment {
        Environment::new(self.clone())
    }
}

/// Superposition of two independent fields; its rate is the sum of rates.
pub fn superpose(a: &DisasterField, b: &DisasterField) -> Result<DisasterField> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let mut components = a.components.clone();
    for c in &b.components {
        if c.rate > 0.0 && components.iter().any(|x| x.seed == c.seed && x.rate > 0.0) {
            return Err(invalid("seed", format!("seed {} used by both fields", c.seed)));
        }
        components.push(*c);
    }
    components.retain(|c| c.rate > 0.0);
    if components.is_empty() {
        components.push(Component { seed: 0, rate: 0.0 });
    }
    Ok(DisasterField { components, dim: a.dim })
}

/// Lazily materialized prefix of one site's stream.
#[derive(Clone, Debug)]
struct SiteStream {
    rng: ChaCha8Rng,
    rate: f64,
    times: Vec<f64>,
}

impl SiteStream {
    fn new(key: u64, rate: f64) -> Self {
        SiteStream {
            rng: ChaCha8Rng::seed_from_u64(key),
            rate,
            times: Vec::new(),
        }
    }

    #[inline]
    fn last(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    fn push_next(&mut self) {
        let gap: f64 = self.rng.sample(Exp1);
        let t = self.last() + gap / self.rate;
        self.times.push(t);
    }

    /// Ensure the prefix reaches at least `t` (some stored time `>= t`).
    #[inline]
    fn extend_to(&mut self, t: f64) {
        if self.rate <= 0.0 {
            return;
        }
        while self.last() < t || self.times.is_empty() {
            self.push_next();
        }
    }

    /// Ensure some stored time is `> t`.
    #[inline]
    fn extend_past(&mut self, t: f64) {
        if self.rate <= 0.0 {
            return;
        }
        while self.last() <= t || self.times.is_empty() {
            self.push_next();
        }
    }

    /// First disaster at or after `t` (infinite for a rate-0 stream).
    #[inline]
    fn first_at_or_after(&mut self, t: f64) -> f64 {
        if self.rate <= 0.0 {
            return f64::INFINITY;
        }
        self.extend_to(t);
        let i = self.times.partition_point(|&x| x < t);
        self.times[i]
    }

    #[inline]
    fn first_after(&mut self, t: f64) -> f64 {
        if self.rate <= 0.0 {
            return f64::INFINITY;
        }
        self.extend_past(t);
        let i = self.times.partition_point(|&x| x <= t);
        self.times[i]
    }

    fn window(&mut self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        if self.rate <= 0.0 || t1 <= t0 {
            return;
        }
        self.extend_to(t1);
        let a = self.times.partition_point(|&x| x < t0);
        let b = self.times.partition_point(|&x| x < t1);
        out.extend_from_slice(&self.times[a..b]);
    }
}

/// A field together with the materialized streams of the sites visited so far.
#[derive(Clone, Debug)]
pub struct Environment {
    field: DisasterField,
    // one map per component
    streams: Vec<FxHashMap<Site, SiteStream>>,
}

impl Environment {
    pub fn new(field: DisasterField) -> Self {
        let streams = field.components.iter().map(|_| FxHashMap::default()).collect();
        Environment { field, streams }
    }

    pub fn field(&self) -> &DisasterField {
        &self.field
    }

    pub fn dimension(&self) -> usize {
        self.field.dim
    }

    /// Drop all cached streams.
    pub fn clear(&mut self) {
        for m in &mut self.streams {
            m.clear();
        }
    }

    /// Replace the field, keeping the allocated caches.
    pub fn reset(&mut self, field: DisasterField) {
        self.streams.resize_with(field.components.len(), FxHashMap::default);
        self.streams.truncate(field.components.len());
        self.field = field;
        self.clear();
    }

    pub fn cached_sites(&self) -> usize {
        self.streams.iter().map(|m| m.len()).sum()
    }

    fn check_site(&self, site: &Site) -> Result<()> {
        if site.dim() != self.field.dim {
            return Err(Error::DimensionMismatch {
                expected: self.field.dim,
                found: site.dim(),
            });
        }
        Ok(())
    }

    #[inline]
    fn stream(&mut self, comp: usize, site: &Site) -> &mut SiteStream {
        let c = self.field.components[comp];
        self.streams[comp]
            .entry(*site)
            .or_insert_with(|| SiteStream::new(seed::site_key(c.seed, site), c.rate))
    }

    /// Sorted disaster times at `site` in `[t0, t1)`.
    pub fn disasters_in_window(&mut self, site: &Site, t0: f64, t1: f64) -> Result<Vec<f64>> {
        if t0 > t1 || t0.is_nan() || t1.is_nan() {
            return Err(Error::InvalidWindow { t0, t1 });
        }
        self.check_site(site)?;
        let mut out = Vec::new();
        for comp in 0..self.field.components.len() {
            self.stream(comp, site).window(t0, t1, &mut out);
        }
        if self.field.components.len() > 1 {
            out.sort_by(|a, b| a.total_cmp(b));
        }
        Ok(out)
    }

    /// Smallest disaster time in `(t, horizon]`, if any.
    pub fn first_disaster_after(&mut self, site: &Site, t: f64, horizon: f64) -> Result<Option<f64>> {
        if t > horizon || t.is_nan() || horizon.is_nan() {
            return Err(Error::InvalidWindow { t0: t, t1: horizon });
        }
        self.check_site(site)?;
        let s = self.next_after(site, t);
        Ok((s <= horizon).then_some(s))
    }

    /// Smallest disaster time strictly after `t`; infinite if none.
    /// Unchecked hot-path variant.
    #[inline]
    pub fn next_after(&mut self, site: &Site, t: f64) -> f64 {
        let mut best = f64::INFINITY;
        for comp in 0..self.field.components.len() {
            best = best.min(self.stream(comp, site).first_after(t));
        }
        best
    }

    /// Smallest disaster time at or after `t`; infinite if none.
    #[inline]
    pub fn next_at_or_after(&mut self, site: &Site, t: f64) -> f64 {
        let mut best = f64::INFINITY;
        for comp in 0..self.field.components.len() {
            best = best.min(self.stream(comp, site).first_at_or_after(t));
        }
        best
    }

    /// Whether `site` has a disaster in `[t0, t1)`.
    #[inline]
    pub fn hit_in(&mut self, site: &Site, t0: f64, t1: f64) -> bool {
        self.next_at_or_after(site, t0) < t1
    }
}
