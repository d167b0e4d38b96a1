//! The branching process embedded at multiples of a period `T`: particles at
//! the origin at time `(k-1)T` and their descendants at the origin at `kT`.
//! In a fixed environment the offspring laws of different periods are
//! independent, and the sign of `λ(m-1) + p(κ)` decides survival.

use rand::Rng;
use rayon::prelude::*;

use crate::brw::{simulate, BrwParams, Configuration, MomentCheck, SimOptions, SnapshotFlavor};
use crate::env::{DisasterField, Environment};
use crate::error::{invalid, Result};
use crate::lattice::Site;
use crate::seed;
use crate::stats::{self, Estimate};
use crate::walk::{estimate_lyapunov, estimate_survival, return_probability, LyapunovEstimate, SurvivalMethod};

/// Empirical offspring law of period `k` in one environment.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringSample {
    pub period: u64,
    /// `counts[j]` replicas ended with `j` particles at the origin.
    pub counts: Vec<u64>,
    pub pmf: Vec<f64>,
    pub n_reps: u64,
    pub mean: f64,
    pub std_err: f64,
    /// Replicas stopped by the population cap (excluded from the law).
    pub n_capped: u64,
}

impl OffspringSample {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.std_err)
    }

    /// `1 - q̂(0)`.
    pub fn nonextinction(&self) -> Estimate {
        let n = self.n_reps - self.n_capped;
        let zero = self.counts.first().copied().unwrap_or(0);
        stats::proportion(n - zero, n)
    }
}

fn check_period(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("T", format!("must be finite and >= 0, got {t}")))
    }
}

/// Offspring of period `k`: one particle at the origin at `(k-1)T`, counted
/// at the origin at `kT` (left limit), all in the environment `env`.
pub fn sample_offspring(
    params: &BrwParams,
    env: &mut Environment,
    period_t: f64,
    k: u64,
    n_reps: u64,
    key: u64,
) -> Result<OffspringSample> {
    check_period(period_t)?;
    if k == 0 {
        return Err(invalid("k", "period index starts at 1"));
    }
    if n_reps == 0 {
        return Err(invalid("n_reps", "must be >= 1"));
    }
    let origin = Site::origin(params.d);
    let start = (k - 1) as f64 * period_t;
    let end = k as f64 * period_t;
    let opts = SimOptions::new(end)
        .starting_at(start)
        .snapshots(&[end], SnapshotFlavor::LeftLimit, true);
    let eta = Configuration::single(origin, 1);
    let period_key = seed::derive(key, "period", k);
    let mut counts: Vec<u64> = Vec::new();
    let mut values = Vec::with_capacity(n_reps as usize);
    let mut n_capped = 0;
    for r in 0..n_reps {
        let res = simulate(params, &eta, env, seed::derive(period_key, "tree", r), &opts)?;
        if res.capped() {
            n_capped += 1;
            continue;
        }
        let at_origin = res.snapshots[0].alive.iter().filter(|p| p.site == origin).count();
        if counts.len() <= at_origin {
            counts.resize(at_origin + 1, 0);
        }
        counts[at_origin] += 1;
        values.push(at_origin as f64);
    }
    let n = values.len() as f64;
    let pmf = counts.iter().map(|&c| c as f64 / n).collect();
    let est = stats::mean_estimate(&values);
    Ok(OffspringSample {
        period: k,
        counts,
        pmf,
        n_reps,
        mean: est.value,
        std_err: if values.len() > 1 { est.std_err } else { 0.0 },
        n_capped,
    })
}

fn pinned_survival(params: &BrwParams, env: &mut Environment, t: f64, n_walkers: u64, key: u64) -> Result<Estimate> {
    let mut rng = seed::rng_from(seed::derive(key, "walkers", 0));
    Ok(estimate_survival(env, params.kappa, t, n_walkers, true, &mut rng)?.estimate())
}

/// Both sides of `m^{(1)} = e^{λ(m-1)T} S̃(T)` in one environment.
pub fn embedded_mean_identity_check(
    params: &BrwParams,
    env: &mut Environment,
    period_t: f64,
    n_reps: u64,
    n_walkers: u64,
    key: u64,
) -> Result<MomentCheck> {
    let sample = sample_offspring(params, env, period_t, 1, n_reps, key)?;
    let s = pinned_survival(params, env, period_t, n_walkers, key)?;
    let g = (params.malthus() * period_t).exp();
    let lhs = sample.estimate();
    let rhs = Estimate::new(g * s.value, g * s.std_err);
    Ok(MomentCheck {
        lhs,
        rhs,
        z: lhs.z_diff(&rhs),
        n_capped: sample.n_capped,
    })
}

/// `1 - q̂^{(1)}(0)` against the lower bound `e^{-λ T q(0)} S̃(T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `lhs + 3σ < rhs` with the combined standard error.
    pub violated: bool,
}

pub fn nonextinction_bound_check(
    params: &BrwParams,
    env: &mut Environment,
    period_t: f64,
    n_reps: u64,
    n_walkers: u64,
    key: u64,
) -> Result<BoundCheck> {
    let sample = sample_offspring(params, env, period_t, 1, n_reps, key)?;
    let s = pinned_survival(params, env, period_t, n_walkers, key)?;
    let f = (-params.lambda * period_t * params.q0()).exp();
    let lhs = sample.nonextinction();
    let rhs = Estimate::new(f * s.value, f * s.std_err);
    let sigma = lhs.std_err.hypot(rhs.std_err);
    Ok(BoundCheck {
        lhs,
        rhs,
        violated: lhs.value + 3.0 * sigma < rhs.value,
    })
}

/// Annealed mean offspring `e^{λ(m-1)T} E[S̃(T)] = e^{(λ(m-1) - α)T} P(X_T = 0)`.
pub fn annealed_embedded_mean(params: &BrwParams, period_t: f64) -> f64 {
    ((params.malthus() - params.alpha) * period_t).exp() * return_probability(params.kappa, params.d, period_t)
}

/// Largest period on the grid `0.5, 1, ..., t_max` whose annealed embedded mean
/// lies in `[lo, hi]`. If none does, the grid point whose mean is closest to
/// the interval on a log scale.
pub fn choose_period(params: &BrwParams, lo: f64, hi: f64, t_max: f64) -> f64 {
    let grid: Vec<f64> = (1..=((t_max / 0.5) as usize).max(1)).map(|i| 0.5 * i as f64).collect();
    if let Some(t) = grid
        .iter()
        .rev()
        .copied()
        .find(|&t| (lo..=hi).contains(&annealed_embedded_mean(params, t)))
    {
        return t;
    }
    let distance = |t: f64| {
        let m = annealed_embedded_mean(params, t).ln();
        (lo.ln() - m).max(m - hi.ln()).max(0.0)
    };
    grid.iter()
        .copied()
        .min_by(|&a, &b| distance(a).total_cmp(&distance(b)))
        .expect("nonempty grid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Subcritical,
    CriticalBand,
    Supercritical,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Subcritical => "subcritical",
            Verdict::CriticalBand => "critical-band",
            Verdict::Supercritical => "supercritical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseVerdict {
    /// `λ(m-1) + p̂(κ)`.
    pub criterion: Estimate,
    pub verdict: Verdict,
    /// More than half of the Lyapunov environments were censored.
    pub unreliable: bool,
    pub lyapunov: LyapunovEstimate,
}

impl PhaseVerdict {
    pub fn from_lyapunov(params: &BrwParams, lyapunov: LyapunovEstimate) -> Self {
        let criterion = Estimate::new(params.malthus() + lyapunov.p_hat, lyapunov.std_err);
        let band = 3.0
            * if criterion.std_err.is_nan() {
                0.0
            } else {
                criterion.std_err
            };
        let verdict = if criterion.value.abs() <= band {
            Verdict::CriticalBand
        } else if criterion.value > 0.0 {
            Verdict::Supercritical
        } else {
            Verdict::Subcritical
        };
        PhaseVerdict {
            criterion,
            verdict,
            unreliable: lyapunov.heavily_censored(),
            lyapunov,
        }
    }

    /// Distance of the criterion from zero in units of its standard error.
    pub fn margin(&self) -> f64 {
        self.criterion.value.abs() / self.criterion.std_err
    }
}

/// Classify by the sign of `λ(m-1) + p̂(κ)` with a `3σ` dead band.
pub fn phase_classify<R: Rng + ?Sized>(
    params: &BrwParams,
    t_lyap: f64,
    n_env: u64,
    method: SurvivalMethod,
    rng: &mut R,
) -> Result<PhaseVerdict> {
    let l = estimate_lyapunov(params.kappa, params.alpha, params.d, t_lyap, n_env, method, false, rng)?;
    Ok(PhaseVerdict::from_lyapunov(params, l))
}

/// Dependence between the periods `k = 1` and `k = 2` across environments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodComparison {
    /// Pearson correlation of the per-field mean offspring of the two periods.
    pub correlation: f64,
    pub correlation_p: f64,
    /// Two-sample Kolmogorov-Smirnov test of the two sets of per-field means.
    pub ks_stat: f64,
    pub ks_p: f64,
    pub n_fields: u64,
}

/// Mean offspring of periods 1 and 2 in each of `n_fields` environments.
pub fn period_means(
    params: &BrwParams,
    period_t: f64,
    n_fields: u64,
    n_reps: u64,
    seed_: u64,
) -> Result<Vec<(f64, f64)>> {
    (0..n_fields)
        .into_par_iter()
        .map(|i| {
            let field = DisasterField::new(seed::derive(seed_, "field", i), params.alpha, params.d)?;
            let mut env = field.environment();
            let key = seed::derive(seed_, "trees", i);
            let a = sample_offspring(params, &mut env, period_t, 1, n_reps, key)?;
            let b = sample_offspring(params, &mut env, period_t, 2, n_reps, key)?;
            Ok((a.mean, b.mean))
        })
        .collect()
}

pub fn compare_periods(
    params: &BrwParams,
    period_t: f64,
    n_fields: u64,
    n_reps: u64,
    seed_: u64,
) -> Result<PeriodComparison> {
    let pairs = period_means(params, period_t, n_fields, n_reps, seed_)?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (r, rp) = stats::pearson(&a, &b);
    let (ks, kp) = stats::ks_two_sample(&a, &b);
    Ok(PeriodComparison {
        correlation: r,
        correlation_p: rp,
        ks_stat: ks,
        ks_p: kp,
        n_fields,
    })
}

/// Empirical distribution of `log(1 - q̂^{(1)}(0))` over environments.
#[derive(Clone, Debug, PartialEq)]
pub struct NonextinctionProfile {
    /// Finite values, sorted.
    pub logs: Vec<f64>,
    /// Environments where no replica left a particle at the origin.
    pub n_infinite: u64,
    /// Heavy left tail: more than 10% infinite values.
    pub heavy_tail: bool,
}

pub fn nonextinction_profile(
    params: &BrwParams,
    period_t: f64,
    n_fields: u64,
    n_reps: u64,
    seed_: u64,
) -> Result<NonextinctionProfile> {
    let vals = (0..n_fields)
        .into_par_iter()
        .map(|i| {
            let field = DisasterField::new(seed::derive(seed_, "field", i), params.alpha, params.d)?;
            let mut env = field.environment();
            let s = sample_offspring(params, &mut env, period_t, 1, n_reps, seed::derive(seed_, "trees", i))?;
            Ok(s.nonextinction().value.ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut logs: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
    logs.sort_by(|a, b| a.total_cmp(b));
    let n_infinite = (vals.len() - logs.len()) as u64;
    Ok(NonextinctionProfile {
        logs,
        n_infinite,
        heavy_tail: n_infinite as f64 > 0.1 * n_fields as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_period_is_trivial() {
        let params = BrwParams::binary(2.0, 0.5, 1.0, 1).unwrap();
        let mut env = DisasterField::new(1, 1.0, 1).unwrap().environment();
        let c = embedded_mean_identity_check(&params, &mut env, 0.0, 20, 20, 1).unwrap();
        assert_eq!(c.lhs.value, 1.0);
        assert_eq!(c.rhs.value, 1.0);
    }

    #[test]
    fn no_branching_gives_zero_one_law() {
        let params = BrwParams::binary(1.0, 0.0, 1.0, 1).unwrap();
        let mut env = DisasterField::new(2, 1.0, 1).unwrap().environment();
        let s = sample_offspring(&params, &mut env, 1.0, 1, 500, 3).unwrap();
        assert!(s.counts.len() <= 2);
        assert!((s.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m: f64 = s.pmf.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        assert!((m - s.mean).abs() < 1e-12);
    }

    #[test]
    fn no_disasters_is_supercritical_when_m_above_one() {
        let params = BrwParams::binary(1.0, 0.5, 0.0, 1).unwrap();
        let mut rng = rand::rngs::SmallRng::seed_from_u64(1);
        let v = phase_classify(&params, 5.0, 10, SurvivalMethod::Quenched, &mut rng).unwrap();
        assert_eq!(v.lyapunov.p_hat, 0.0);
        assert_eq!(v.verdict, Verdict::Supercritical);
    }

    #[test]
    fn sterile_law_is_subcritical() {
        let params = BrwParams::new(1.0, 1.0, vec![1.0], 1.0, 1).unwrap();
        let mut rng = rand::rngs::SmallRng::seed_from_u64(1);
        let v = phase_classify(&params, 5.0, 20, SurvivalMethod::Quenched, &mut rng).unwrap();
        assert_eq!(v.verdict, Verdict::Subcritical);
        assert!(v.criterion.value <= -2.0 + 3.0 * v.criterion.std_err);
    }

    #[test]
    fn period_choice_lands_in_range() {
        let params = BrwParams::binary(2.0, 3.0, 1.0, 1).unwrap();
        let t = choose_period(&params, 0.5, 50.0, 10.0);
        let m = annealed_embedded_mean(&params, t);
        assert!((0.5..=50.0).contains(&m), "T={t} m={m}");
        // a decaying mean falls back to the shortest period
        let params = BrwParams::binary(2.0, 0.5, 1.0, 1).unwrap();
        assert_eq!(choose_period(&params, 0.5, 50.0, 10.0), 0.5);
    }
}
