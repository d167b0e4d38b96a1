//! Replica-level estimators built on the engine.

use rayon::prelude::*;

use super::engine::{simulate, Caps, SimOptions, SimResult, SnapshotFlavor};
use super::{BrwParams, Configuration};
use crate::env::{DisasterField, Environment};
use crate::error::{invalid, Error, Result};
use crate::lattice::Site;
use crate::seed;
use crate::stats::{self, Estimate};
use crate::walk::{estimate_survival, SurvivalEstimate};

/// Finite-horizon survival frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalFrequency {
    pub horizon: f64,
    /// Replicas that hit a cap are counted as survivors here.
    pub estimate: SurvivalEstimate,
    pub n_capped: u64,
    /// Survivors among replicas that ran to the horizon without hitting a cap.
    pub uncapped_survivors: u64,
}

fn check_reps(n: u64) -> Result<()> {
    if n == 0 {
        Err(invalid("n_reps", "must be >= 1"))
    } else {
        Ok(())
    }
}

fn check_sorted(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.windows(2).any(|w| w[0] > w[1]) || xs.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        Err(invalid(
            name,
            "must be a nonempty nondecreasing list of finite values >= 0",
        ))
    } else {
        Ok(())
    }
}

/// Replica `i`: fresh field and tree keyed by `hash(seed, i)`, one particle at the origin.
fn replica(params: &BrwParams, seed_: u64, i: u64, opts: &SimOptions) -> Result<SimResult> {
    let field = DisasterField::new(seed::derive(seed_, "field", i), params.alpha, params.d)?;
    let mut env = field.environment();
    let eta = Configuration::single(Site::origin(params.d), 1);
    simulate(params, &eta, &mut env, seed::derive(seed_, "tree", i), opts)
}

fn frequencies(horizons: &[f64], rows: &[(Vec<bool>, Vec<bool>)]) -> Vec<SurvivalFrequency> {
    let n = rows.len() as u64;
    horizons
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let alive = rows.iter().filter(|r| r.0[j]).count() as u64;
            let capped = rows.iter().filter(|r| r.1[j]).count() as u64;
            SurvivalFrequency {
                horizon: h,
                estimate: SurvivalEstimate::from_counts(alive, n),
                n_capped: capped,
                uncapped_survivors: alive - capped,
            }
        })
        .collect()
}

/// Survival frequencies at several horizons from the same replicas, so the
/// curve is nonincreasing path-wise.
pub fn survival_curve(
    params: &BrwParams,
    horizons: &[f64],
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<Vec<SurvivalFrequency>> {
    check_reps(n_reps)?;
    check_sorted("horizons", horizons)?;
    let h_max = *horizons.last().expect("nonempty");
    let opts = SimOptions::new(h_max)
        .snapshots(horizons, SnapshotFlavor::LeftLimit, false)
        .with_caps(caps);
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let res = replica(params, seed_, i, &opts)?;
            let alive = (0..horizons.len())
                .map(|j| res.snapshots.get(j).is_none_or(|s| s.total > 0))
                .collect();
            let capped = (0..horizons.len()).map(|j| res.snapshots.get(j).is_none()).collect();
            Ok((alive, capped))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(frequencies(horizons, &rows))
}

/// Fraction of independent replicas with `|Z(horizon)| > 0`.
pub fn survival_frequency(
    params: &BrwParams,
    horizon: f64,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<SurvivalFrequency> {
    Ok(survival_curve(params, &[horizon], n_reps, caps, seed_)?[0])
}

fn require_no_death(params: &BrwParams) -> Result<()> {
    if params.q0() > 0.0 {
        return Err(Error::Precondition(
            "the monotone coupling in lambda needs q(0) = 0 (the first child continues its parent)".into(),
        ));
    }
    Ok(())
}

/// Population sizes `counts[snapshot][j]` of the processes with branching
/// rates `lambdas[j] <= params.lambda`, all read off one run at rate
/// `params.lambda` by thinning: every branching event carries a uniform mark
/// in `[0, params.lambda)` and is real for rate `l` iff the mark is below `l`.
pub fn lambda_coupled_counts(
    params: &BrwParams,
    lambdas: &[f64],
    eta0: &Configuration,
    env: &mut Environment,
    key: u64,
    opts: &SimOptions,
) -> Result<Vec<Vec<u64>>> {
    require_no_death(params)?;
    if lambdas.iter().any(|&l| !(l >= 0.0 && l <= params.lambda)) {
        return Err(invalid("lambdas", "each rate must lie in [0, params.lambda]"));
    }
    let mut opts = opts.clone();
    opts.full_snapshots = true;
    let res = simulate(params, eta0, env, key, &opts)?;
    Ok(res
        .snapshots
        .iter()
        .map(|s| lambdas.iter().map(|&l| count_for(s, l, params.lambda)).collect())
        .collect())
}

fn count_for(s: &super::Snapshot, l: f64, l_max: f64) -> u64 {
    if l >= l_max {
        s.total
    } else {
        s.count_below(l)
    }
}

/// Survival frequencies at horizon for each rate in `lambdas` on shared
/// randomness; nondecreasing in the rate path-wise.
pub fn coupled_survival(
    params: &BrwParams,
    lambdas: &[f64],
    horizon: f64,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<Vec<SurvivalFrequency>> {
    check_reps(n_reps)?;
    require_no_death(params)?;
    if lambdas.iter().any(|&l| !(l >= 0.0 && l <= params.lambda)) {
        return Err(invalid("lambdas", "each rate must lie in [0, params.lambda]"));
    }
    let opts = SimOptions::new(horizon)
        .snapshots(&[horizon], SnapshotFlavor::LeftLimit, true)
        .with_caps(caps);
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let res = replica(params, seed_, i, &opts)?;
            let capped = res.snapshots.is_empty();
            let snap = res.snapshots.first().unwrap_or(&res.final_state);
            let alive = lambdas
                .iter()
                .map(|&l| count_for(snap, l, params.lambda) > 0)
                .collect::<Vec<_>>();
            let capped_alive: Vec<bool> = alive.iter().map(|&a| a && capped).collect();
            Ok((alive, capped_alive))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_reps;
    Ok((0..lambdas.len())
        .map(|j| {
            let alive = rows.iter().filter(|r| r.0[j]).count() as u64;
            let capped = rows.iter().filter(|r| r.1[j]).count() as u64;
            SurvivalFrequency {
                horizon,
                estimate: SurvivalEstimate::from_counts(alive, n),
                n_capped: capped,
                uncapped_survivors: alive - capped,
            }
        })
        .collect())
}

/// Both sides of `E_ω|Z(t)| = e^{λ(m-1)t} S(t)` in one environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentCheck {
    /// Mean population at `t` over independent trees.
    pub lhs: Estimate,
    /// `e^{λ(m-1)t}` times the walker estimate of `S(t)`.
    pub rhs: Estimate,
    pub z: f64,
    pub n_capped: u64,
}

/// Estimate both sides of the first-moment identity in the environment `env`.
/// Trees are keyed by `hash(key, "tree", r)`; the walkers by `hash(key, "walkers", 0)`.
pub fn moment_identity_check(
    params: &BrwParams,
    env: &mut Environment,
    t: f64,
    n_reps: u64,
    n_walkers: u64,
    key: u64,
) -> Result<MomentCheck> {
    check_reps(n_reps)?;
    let opts = SimOptions::new(t).snapshots(&[t], SnapshotFlavor::LeftLimit, false);
    let eta = Configuration::single(Site::origin(params.d), 1);
    let mut sizes = Vec::with_capacity(n_reps as usize);
    let mut n_capped = 0;
    for r in 0..n_reps {
        let res = simulate(params, &eta, env, seed::derive(key, "tree", r), &opts)?;
        if res.capped() {
            n_capped += 1;
            continue;
        }
        sizes.push(res.snapshots[0].total as f64);
    }
    let lhs = if sizes.len() > 1 {
        stats::mean_estimate(&sizes)
    } else {
        Estimate::new(stats::mean(&sizes), 0.0)
    };
    let mut rng = seed::rng_from(seed::derive(key, "walkers", 0));
    let s = estimate_survival(env, params.kappa, t, n_walkers, false, &mut rng)?;
    let growth = (params.malthus() * t).exp();
    let rhs = Estimate::new(growth * s.value, growth * s.std_err);
    Ok(MomentCheck {
        lhs,
        rhs,
        z: lhs.z_diff(&rhs),
        n_capped,
    })
}

/// Exponential growth rate of `|Z(t)|` among surviving replicas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthEstimate {
    /// Mean over survivors of the least-squares slope of `log |Z(t)|` on the
    /// second half of `[0, horizon]`; `None` without survivors.
    pub slope: Option<Estimate>,
    pub n_survivors: u64,
    pub n_capped: u64,
    pub n_reps: u64,
}

pub fn growth_rate(params: &BrwParams, horizon: f64, n_reps: u64, caps: Caps, seed_: u64) -> Result<GrowthEstimate> {
    check_reps(n_reps)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be > 0"));
    }
    let times: Vec<f64> = (0..=20).map(|i| horizon * (0.5 + 0.5 * i as f64 / 20.0)).collect();
    let opts = SimOptions::new(horizon)
        .snapshots(&times, SnapshotFlavor::LeftLimit, false)
        .with_caps(caps);
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let res = replica(params, seed_, i, &opts)?;
            let pts: Vec<(f64, f64)> = res
                .snapshots
                .iter()
                .filter(|s| s.total > 0)
                .map(|s| (s.time, (s.total as f64).ln()))
                .collect();
            let survived = if res.capped() {
                true
            } else {
                res.snapshots.last().is_some_and(|s| s.total > 0)
            };
            let slope = (survived && pts.len() >= 3).then(|| {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                stats::ls_slope(&x, &y)
            });
            Ok((slope, res.capped()))
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    let n_capped = rows.iter().filter(|r| r.1).count() as u64;
    let slope = match slopes.len() {
        0 => None,
        1 => Some(Estimate::new(slopes[0], f64::NAN)),
        _ => Some(stats::mean_estimate(&slopes)),
    };
    Ok(GrowthEstimate {
        slope,
        n_survivors: slopes.len() as u64,
        n_capped,
        n_reps,
    })
}

/// For each horizon `H`: among replicas alive at `H`, the fraction with
/// `|Z(H)| < k`, with its binomial standard error and the survivor count.
/// Replicas that hit the population cap count as large.
pub fn population_tail_fractions(
    params: &BrwParams,
    horizons: &[f64],
    k: u64,
    n_reps: u64,
    caps: Caps,
    seed_: u64,
) -> Result<Vec<(f64, Estimate, u64)>> {
    check_reps(n_reps)?;
    check_sorted("horizons", horizons)?;
    let h_max = *horizons.last().expect("nonempty");
    let opts = SimOptions::new(h_max)
        .snapshots(horizons, SnapshotFlavor::LeftLimit, false)
        .with_caps(caps);
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let res = replica(params, seed_, i, &opts)?;
            Ok((0..horizons.len())
                .map(|j| res.snapshots.get(j).map_or(u64::MAX, |s| s.total))
                .collect::<Vec<u64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let alive: Vec<u64> = rows.iter().map(|r| r[j]).filter(|&c| c > 0).collect();
            let small = alive.iter().filter(|&&c| c < k).count() as u64;
            let n = alive.len() as u64;
            let est = if n == 0 {
                Estimate::new(f64::NAN, f64::NAN)
            } else {
                stats::proportion(small, n)
            };
            (h, est, n)
        })
        .collect())
}
