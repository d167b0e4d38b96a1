//! A single continuous-time simple random walk among disasters.
//!
//! `S(t)` is the quenched probability that the walker started at the origin
//! has not met a disaster before `t`; the pinned variant additionally asks
//! for the walker to be back at the origin at `t`. Two evaluators are
//! provided: Monte Carlo over walkers, and an exact forward equation on a
//! finite window ([`quenched`]).

pub mod quenched;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::env::{DisasterField, Environment};
use crate::error::{invalid, Error, Result};
use crate::lattice::Site;
use crate::seed;
use crate::stats;

/// Piecewise-constant, right-continuous lattice path.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkPath {
    pub start_site: Site,
    pub start_time: f64,
    /// `(time, new site)` with strictly increasing times.
    pub jumps: Vec<(f64, Site)>,
    pub horizon: f64,
}

impl WalkPath {
    pub fn dim(&self) -> usize {
        self.start_site.dim()
    }

    /// Site after the last jump at or before `t`.
    pub fn position_at(&self, t: f64) -> Site {
        let i = self.jumps.partition_point(|&(s, _)| s <= t);
        if i == 0 {
            self.start_site
        } else {
            self.jumps[i - 1].1
        }
    }

    pub fn end_site(&self) -> Site {
        self.jumps.last().map_or(self.start_site, |j| j.1)
    }

    /// `(site, from, to)` occupancy intervals; `to` of the last one is the horizon.
    pub fn intervals(&self) -> impl Iterator<Item = (Site, f64, f64)> + '_ {
        let n = self.jumps.len();
        (0..=n).map(move |i| {
            let (site, from) = if i == 0 {
                (self.start_site, self.start_time)
            } else {
                (self.jumps[i - 1].1, self.jumps[i - 1].0)
            };
            let to = if i < n { self.jumps[i].0 } else { self.horizon };
            (site, from, to)
        })
    }
}

/// Monte Carlo survival probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalEstimate {
    pub value: f64,
    pub n_samples: u64,
    pub std_err: f64,
    /// The raw estimate was zero and has been replaced by a floor.
    pub censored: bool,
}

impl SurvivalEstimate {
    pub fn from_counts(successes: u64, n: u64) -> Self {
        let e = stats::proportion(successes, n);
        SurvivalEstimate {
            value: e.value,
            n_samples: n,
            std_err: e.std_err,
            censored: false,
        }
    }

    pub fn estimate(&self) -> stats::Estimate {
        stats::Estimate::new(self.value, self.std_err)
    }

    /// Replace a zero estimate by `1 / (2 n)`.
    pub fn floored(mut self) -> Self {
        if self.value == 0.0 {
            self.value = 1.0 / (2.0 * self.n_samples as f64);
            self.censored = true;
        }
        self
    }
}

#[inline]
fn exp_gap<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        let e: f64 = rng.sample(Exp1);
        e / rate
    }
}

fn check_rate(name: &'static str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {x}")))
    }
}

/// Walk of jump rate `kappa` on Z^d started at the origin at time 0.
pub fn simulate_walk<R: Rng + ?Sized>(kappa: f64, d: usize, horizon: f64, rng: &mut R) -> Result<WalkPath> {
    check_rate("kappa", kappa)?;
    check_rate("horizon", horizon)?;
    let start = Site::new(&vec![0; d])?;
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut pos = start;
    loop {
        t += exp_gap(rng, kappa);
        if t > horizon {
            break;
        }
        pos = pos.neighbor(rng.random_range(0..2 * d));
        jumps.push((t, pos));
    }
    Ok(WalkPath {
        start_site: start,
        start_time: 0.0,
        jumps,
        horizon,
    })
}

/// First time in `[start, horizon]` at which the walker sits on a site with a
/// disaster (right-continuous position), or `None` if it survives the horizon.
pub fn extinction_time(path: &WalkPath, env: &mut Environment) -> Result<Option<f64>> {
    if path.dim() != env.dimension() {
        return Err(Error::DimensionMismatch {
            expected: env.dimension(),
            found: path.dim(),
        });
    }
    let last = path.jumps.len();
    for (i, (site, from, to)) in path.intervals().enumerate() {
        let s = env.next_at_or_after(&site, from);
        let hit = if i == last { s <= to } else { s < to };
        if hit {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// One walker on the fly: `Some(end site)` if it survives `[0, t)`.
#[inline]
pub(crate) fn walker_survives<R: Rng + ?Sized>(
    env: &mut Environment,
    kappa: f64,
    d: usize,
    t: f64,
    rng: &mut R,
) -> Option<Site> {
    let mut pos = Site::origin(d);
    let mut from = 0.0;
    loop {
        let next = from + exp_gap(rng, kappa);
        let to = next.min(t);
        if env.hit_in(&pos, from, to) {
            return None;
        }
        if next >= t {
            return Some(pos);
        }
        pos = pos.neighbor(rng.random_range(0..2 * d));
        from = next;
    }
}

/// Survivor counts `(survived, survived and at origin)` over `n` walkers in one environment.
pub fn survival_counts<R: Rng + ?Sized>(
    env: &mut Environment,
    kappa: f64,
    t: f64,
    n: u64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    check_rate("kappa", kappa)?;
    check_rate("t", t)?;
    let d = env.dimension();
    let origin = Site::origin(d);
    let mut alive = 0;
    let mut pinned = 0;
    for _ in 0..n {
        if let Some(end) = walker_survives(env, kappa, d, t, rng) {
            alive += 1;
            if end == origin {
                pinned += 1;
            }
        }
    }
    Ok((alive, pinned))
}

/// Fraction of `n_walkers` independent walkers in one environment with
/// `tau >= t` (and `X(t) = 0` when `pin_to_origin`).
pub fn estimate_survival<R: Rng + ?Sized>(
    env: &mut Environment,
    kappa: f64,
    t: f64,
    n_walkers: u64,
    pin_to_origin: bool,
    rng: &mut R,
) -> Result<SurvivalEstimate> {
    if n_walkers == 0 {
        return Err(invalid("n_walkers", "must be >= 1"));
    }
    let (alive, pinned) = survival_counts(env, kappa, t, n_walkers, rng)?;
    let k = if pin_to_origin { pinned } else { alive };
    Ok(SurvivalEstimate::from_counts(k, n_walkers))
}

/// Survival with a fresh environment per walker; its mean is `exp(-alpha t)`.
pub fn annealed_survival<R: Rng + ?Sized>(
    kappa: f64,
    alpha: f64,
    d: usize,
    t: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<SurvivalEstimate> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be >= 1"));
    }
    check_rate("kappa", kappa)?;
    check_rate("t", t)?;
    let mut env = DisasterField::new(0, alpha, d)?.environment();
    let mut alive = 0;
    for _ in 0..n_samples {
        env.reset(DisasterField::new(rng.random(), alpha, d)?);
        if walker_survives(&mut env, kappa, d, t, rng).is_some() {
            alive += 1;
        }
    }
    Ok(SurvivalEstimate::from_counts(alive, n_samples))
}

/// How `S(t)` is evaluated inside one environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurvivalMethod {
    /// Fraction of surviving walkers; zero estimates are floored at `1 / (2 n)`.
    MonteCarlo { n_walkers: u64 },
    /// Exact forward equation on a finite window (see [`quenched`]).
    Quenched,
}

impl SurvivalMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SurvivalMethod::MonteCarlo { .. } => "mc",
            SurvivalMethod::Quenched => "quenched",
        }
    }
}

/// `log S(t)` for each requested time in one environment, with censor flags.
fn log_survival_in_env(
    env: &mut Environment,
    kappa: f64,
    times: &[f64],
    method: SurvivalMethod,
    pin: bool,
    rng_key: u64,
) -> Result<Vec<(f64, bool)>> {
    match method {
        SurvivalMethod::MonteCarlo { n_walkers } => times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut rng = seed::rng_from(seed::combine(rng_key, i as u64));
                let s = estimate_survival(env, kappa, t, n_walkers, pin, &mut rng)?.floored();
                Ok((s.value.ln(), s.censored))
            })
            .collect(),
        SurvivalMethod::Quenched => {
            let logs = quenched::log_survival(env, kappa, times, pin)?;
            Ok(logs
                .into_iter()
                .map(|l| {
                    if l < quenched::LOG_FLOOR {
                        (quenched::LOG_FLOOR, true)
                    } else {
                        (l, false)
                    }
                })
                .collect())
        }
    }
}

/// Lyapunov exponent estimate `(1/t) E[log S(t)]` over fresh environments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub p_hat: f64,
    /// NaN when only one environment was used.
    pub std_err: f64,
    pub censor_fraction: f64,
    pub n_env: u64,
}

impl LyapunovEstimate {
    /// More than half of the environments hit the floor.
    pub fn heavily_censored(&self) -> bool {
        self.censor_fraction > 0.5
    }
}

pub(crate) fn check_env_count(n_env: u64) -> Result<()> {
    if n_env == 0 {
        Err(invalid("n_env", "must be >= 1"))
    } else {
        Ok(())
    }
}

/// Per-environment `log S(t)` values at each requested time. Environments are
/// independent replicas keyed by `hash(base_seed, index)`; the result does not
/// depend on the number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn log_survival_samples(
    kappa: f64,
    alpha: f64,
    d: usize,
    times: &[f64],
    n_env: u64,
    method: SurvivalMethod,
    pin: bool,
    base_seed: u64,
) -> Result<Vec<Vec<(f64, bool)>>> {
    check_env_count(n_env)?;
    check_rate("kappa", kappa)?;
    if let SurvivalMethod::MonteCarlo { n_walkers: 0 } = method {
        return Err(invalid("n_walkers", "must be >= 1"));
    }
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(invalid("t", "all times must be > 0"));
    }
    // validate once before fanning out
    DisasterField::new(0, alpha, d)?;
    (0..n_env)
        .into_par_iter()
        .map(|i| {
            let field = DisasterField::new(seed::derive(base_seed, "env", i), alpha, d)?;
            let mut env = field.environment();
            log_survival_in_env(
                &mut env,
                kappa,
                times,
                method,
                pin,
                seed::derive(base_seed, "walkers", i),
            )
        })
        .collect()
}

/// Average of `(1/t) log S(t)` over `n_env` fresh environments.
#[allow(clippy::too_many_arguments)]
pub fn estimate_lyapunov<R: Rng + ?Sized>(
    kappa: f64,
    alpha: f64,
    d: usize,
    t: f64,
    n_env: u64,
    method: SurvivalMethod,
    pin: bool,
    rng: &mut R,
) -> Result<LyapunovEstimate> {
    let samples = log_survival_samples(kappa, alpha, d, &[t], n_env, method, pin, rng.random())?;
    let rates: Vec<f64> = samples.iter().map(|v| v[0].0 / t).collect();
    let censored = samples.iter().filter(|v| v[0].1).count();
    let est = stats::mean_estimate(&rates);
    Ok(LyapunovEstimate {
        p_hat: est.value,
        std_err: est.std_err,
        censor_fraction: censored as f64 / n_env as f64,
        n_env,
    })
}

/// One row of the concentration profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationRow {
    pub t: f64,
    pub mean_log: f64,
    /// Sample standard deviation of `log S(t)`; NaN with `degenerate` set for one environment.
    pub std_log: f64,
    /// Standard error of `std_log`, normal approximation `s / sqrt(2 (n - 1))`.
    pub std_log_se: f64,
    pub censor_fraction: f64,
    pub degenerate: bool,
}

/// Sample mean and spread of `log S(t)` across environments for each `t`.
/// The same environments are used at every time.
pub fn concentration_profile<R: Rng + ?Sized>(
    kappa: f64,
    alpha: f64,
    d: usize,
    t_list: &[f64],
    n_env: u64,
    method: SurvivalMethod,
    rng: &mut R,
) -> Result<Vec<ConcentrationRow>> {
    let samples = log_survival_samples(kappa, alpha, d, t_list, n_env, method, false, rng.random())?;
    Ok(t_list
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let logs: Vec<f64> = samples.iter().map(|v| v[j].0).collect();
            let censored = samples.iter().filter(|v| v[j].1).count();
            let sd = stats::std_dev(&logs);
            let degenerate = logs.len() < 2;
            ConcentrationRow {
                t,
                mean_log: stats::mean(&logs),
                std_log: sd,
                std_log_se: if degenerate {
                    f64::NAN
                } else {
                    sd / (2.0 * (logs.len() - 1) as f64).sqrt()
                },
                censor_fraction: censored as f64 / n_env as f64,
                degenerate,
            }
        })
        .collect())
}

/// `P(X(t) = 0)` for the rate-`kappa` walk on Z^d, by summing over jump counts.
pub fn return_probability(kappa: f64, d: usize, t: f64) -> f64 {
    // each coordinate moves as an independent rate-(kappa/d) walk on Z
    let mu = kappa * t / d as f64;
    if mu == 0.0 {
        return 1.0;
    }
    let n_max = (mu + 12.0 * mu.sqrt() + 40.0) as u64;
    let mut one_dim = 0.0;
    for n in (0..=n_max).step_by(2) {
        // P(Z_n = 0) = C(n, n/2) / 2^n
        let ln_p = stats::ln_factorial(n) - 2.0 * stats::ln_factorial(n / 2) - n as f64 * std::f64::consts::LN_2;
        one_dim += stats::poisson_pmf(n, mu) * ln_p.exp();
    }
    one_dim.powi(d as i32)
}
