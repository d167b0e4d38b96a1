//! One runner per subcommand. Each returns its records in a canonical order;
//! replica seeds come from `derive(seed, label, index)` so adding cells or
//! replicas never changes the existing ones.

use rayon::prelude::*;

use brwd_core::boxes::{
    fkg_from_pairs, paired_exit_counts, sfold_exit_check, Functional, InequalityCheck, SpaceTimeBox,
};
use brwd_core::brw::{coupled_survival, growth_rate, moment_identity_check, survival_curve, survival_frequency};
use brwd_core::gw_embed::{embedded_mean_identity_check, nonextinction_bound_check, phase_classify, PhaseVerdict};
use brwd_core::oracles::verify_suites;
use brwd_core::percolation::{
    brw_perc_survival, dependence_range_probe, independent_perc_curve, Construction, PairCorrelation, PercConfig,
};
use brwd_core::stats::{self, Estimate};
use brwd_core::walk::{annealed_survival, concentration_profile, estimate_lyapunov};
use brwd_core::{seed, Configuration, DisasterField, Site};

use crate::config::{Experiment, RunConfig};
use crate::error::CliError;
use crate::record::Record;

pub fn run(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    match cfg.experiment {
        Experiment::Annealed => annealed(cfg),
        Experiment::Lyapunov => lyapunov(cfg),
        Experiment::BrwSurvival => brw_survival(cfg),
        Experiment::MomentCheck => moment_check(cfg),
        Experiment::Embed => embed(cfg),
        Experiment::Phase => phase(cfg),
        Experiment::Sweep => sweep(cfg),
        Experiment::BoxesFkg => boxes_fkg(cfg),
        Experiment::Perc => perc(cfg),
        Experiment::Verify => verify(cfg),
    }
}

fn annealed(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let alpha = cfg.f64("alpha")?;
    let n = cfg.positive_u64("n_samples")?;
    let mut cells = Vec::new();
    for kappa in cfg.nonempty_f64_list("kappa")? {
        for d in cfg.usize_list("d")? {
            for t in cfg.nonempty_f64_list("t")? {
                cells.push((kappa, d, t));
            }
        }
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(kappa, d, t))| {
            let mut rng = seed::rng_from(seed::derive(cfg.seed, "annealed", i as u64));
            let s = annealed_survival(kappa, alpha, d, t, n, &mut rng)?;
            let target = (-alpha * t).exp();
            let sigma = stats::binomial_se(target, n);
            let z = (s.value - target) / sigma;
            Ok(Record::new("annealed")
                .with("kappa", kappa)
                .with("d", d)
                .with("t", t)
                .with("n_samples", n)
                .with("survival", s.value)
                .with("survival_se", s.std_err)
                .exact("target", target)
                .with("z", z)
                .with("pass", z.abs() <= 3.0))
        })
        .collect()
}

fn lyapunov(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let alpha = cfg.f64("alpha")?;
    let d = cfg.usize("d")?;
    let n_env = cfg.positive_u64("n_env")?;
    let method = cfg.method()?;
    let pins: Vec<bool> = match cfg.str("pin") {
        "both" => vec![false, true],
        _ => vec![cfg
            .bool("pin")
            .map_err(|_| CliError::config("pin", "expected true, false or both"))?],
    };
    let times = cfg.nonempty_f64_list("t")?;
    let mut out = Vec::new();
    for (i, kappa) in cfg.nonempty_f64_list("kappa")?.into_iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            // pinned and unpinned share their environments
            let key = seed::derive(seed::derive(cfg.seed, "lyapunov", i as u64), "t", j as u64);
            for &pin in &pins {
                let l = estimate_lyapunov(kappa, alpha, d, t, n_env, method, pin, &mut seed::rng_from(key))?;
                out.push(
                    Record::new("lyapunov")
                        .with("kappa", kappa)
                        .with("t", t)
                        .with("pin", pin)
                        .with("method", method.label())
                        .estimate("p_hat", Estimate::new(l.p_hat, l.std_err))
                        .with("censor_fraction", l.censor_fraction)
                        .with("n_env", l.n_env),
                );
            }
        }
        if cfg.bool("concentration")? {
            let key = seed::derive(cfg.seed, "concentration", i as u64);
            for row in concentration_profile(kappa, alpha, d, &times, n_env, method, &mut seed::rng_from(key))? {
                out.push(
                    Record::new("concentration")
                        .with("kappa", kappa)
                        .with("t", row.t)
                        .with("method", method.label())
                        .with("mean_log", row.mean_log)
                        .estimate("std_log", Estimate::new(row.std_log, row.std_log_se))
                        .estimate(
                            "std_log_over_t",
                            Estimate::new(row.std_log / row.t, row.std_log_se / row.t),
                        )
                        .with("censor_fraction", row.censor_fraction),
                );
            }
        }
    }
    Ok(out)
}

fn brw_survival(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = cfg.params()?;
    let horizons = cfg.nonempty_f64_list("horizon")?;
    let n_reps = cfg.positive_u64("n_reps")?;
    let caps = cfg.caps()?;
    let mut out: Vec<Record> = survival_curve(&params, &horizons, n_reps, caps, cfg.seed)?
        .into_iter()
        .map(|f| {
            Record::new("survival")
                .with("horizon", f.horizon)
                .estimate("survival", f.estimate.estimate())
                .with("n_reps", n_reps)
                .with("n_capped", f.n_capped)
                .with("uncapped_survivors", f.uncapped_survivors)
        })
        .collect();
    if cfg.bool("growth")? {
        let h = *horizons.last().expect("nonempty");
        out.push(growth_record(&params, h, n_reps, caps, cfg.seed)?);
    }
    Ok(out)
}

fn growth_record(
    params: &brwd_core::BrwParams,
    horizon: f64,
    n_reps: u64,
    caps: brwd_core::brw::Caps,
    seed_: u64,
) -> Result<Record, CliError> {
    let g = growth_rate(params, horizon, n_reps, caps, seed_)?;
    let slope = g.slope.unwrap_or(Estimate::new(f64::NAN, f64::NAN));
    Ok(Record::new("growth")
        .with("horizon", horizon)
        .estimate("slope", slope)
        .with("n_survivors", g.n_survivors)
        .with("n_capped", g.n_capped)
        .with("positive", g.slope.is_some_and(|s| s.value > 3.0 * s.std_err)))
}

fn identity_summary(kind: &str, zs: &[f64]) -> Record {
    let within = zs.iter().filter(|z| z.abs() <= 3.0).count();
    let frac = within as f64 / zs.len() as f64;
    Record::new(kind)
        .with("n_fields", zs.len())
        .with("within_3_sigma", within)
        .with("fraction", frac)
        .with("pass", frac >= 0.95)
}

fn moment_check(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = cfg.params()?;
    let t = cfg.f64("t")?;
    let (n_reps, n_walkers) = (cfg.positive_u64("n_reps")?, cfg.positive_u64("n_walkers")?);
    let mut out = (0..cfg.positive_u64("n_fields")?)
        .into_par_iter()
        .map(|i| {
            let mut env = DisasterField::new(seed::derive(cfg.seed, "field", i), params.alpha, params.d)?.environment();
            let m = moment_identity_check(
                &params,
                &mut env,
                t,
                n_reps,
                n_walkers,
                seed::derive(cfg.seed, "trees", i),
            )?;
            Ok(Record::new("field")
                .with("field", i)
                .estimate("lhs", m.lhs)
                .estimate("rhs", m.rhs)
                .with("z", m.z)
                .with("n_capped", m.n_capped))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let zs = z_column(&out);
    out.push(identity_summary("summary", &zs));
    Ok(out)
}

fn z_column(rs: &[Record]) -> Vec<f64> {
    rs.iter()
        .map(|r| match r.get("z") {
            Some(crate::record::Value::Float(z)) => *z,
            _ => f64::NAN,
        })
        .collect()
}

fn embed(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = cfg.params()?;
    let period = cfg.f64("T")?;
    let (n_reps, n_walkers) = (cfg.positive_u64("n_reps")?, cfg.positive_u64("n_walkers")?);
    let mut out = (0..cfg.positive_u64("n_fields")?)
        .into_par_iter()
        .map(|i| {
            let mut env = DisasterField::new(seed::derive(cfg.seed, "field", i), params.alpha, params.d)?.environment();
            let key = seed::derive(cfg.seed, "trees", i);
            let m = embedded_mean_identity_check(&params, &mut env, period, n_reps, n_walkers, key)?;
            let b = nonextinction_bound_check(&params, &mut env, period, n_reps, n_walkers, key)?;
            Ok(Record::new("field")
                .with("field", i)
                .estimate("lhs", m.lhs)
                .estimate("rhs", m.rhs)
                .with("z", m.z)
                .estimate("nonextinction", b.lhs)
                .estimate("nonextinction_bound", b.rhs)
                .with("bound_violated", b.violated)
                .with("n_capped", m.n_capped))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let zs = z_column(&out);
    let violations = out
        .iter()
        .filter(|r| matches!(r.get("bound_violated"), Some(crate::record::Value::Bool(true))))
        .count();
    let mut summary = identity_summary("summary", &zs);
    let ok = !summary.failed() && violations as f64 <= 0.05 * zs.len() as f64;
    summary.fields.retain(|(k, _)| k != "pass");
    out.push(summary.with("bound_violations", violations).with("pass", ok));
    Ok(out)
}

fn phase_record(v: &PhaseVerdict) -> Record {
    Record::new("phase")
        .estimate("criterion", v.criterion)
        .with("verdict", v.verdict.as_str())
        .with("unreliable", v.unreliable)
        .estimate("p_hat", Estimate::new(v.lyapunov.p_hat, v.lyapunov.std_err))
        .with("censor_fraction", v.lyapunov.censor_fraction)
}

fn phase(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = cfg.params()?;
    let mut rng = seed::rng_from(seed::derive(cfg.seed, "phase", 0));
    let v = phase_classify(
        &params,
        cfg.f64("t")?,
        cfg.positive_u64("n_env")?,
        cfg.method()?,
        &mut rng,
    )?;
    let horizon = cfg.f64("horizon")?;
    let n_reps = cfg.positive_u64("n_reps")?;
    let caps = cfg.caps()?;
    let f = survival_frequency(&params, horizon, n_reps, caps, seed::derive(cfg.seed, "survival", 0))?;
    let phase = phase_record(&v)
        .with("malthus", params.malthus())
        .with("horizon", horizon)
        .estimate("survival", f.estimate.estimate())
        .with("n_capped", f.n_capped);
    let growth = growth_record(&params, horizon, n_reps, caps, seed::derive(cfg.seed, "growth", 0))?;
    Ok(vec![phase, growth])
}

fn sweep(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let ps = cfg.f64_list("p")?;
    if !ps.is_empty() {
        let k = cfg.usize("K")?;
        let curve = independent_perc_curve(&ps, k, cfg.positive_u64("n_reps")?, cfg.seed)?;
        return Ok(ps
            .iter()
            .zip(curve)
            .map(|(&p, s)| {
                Record::new("perc")
                    .with("p", p)
                    .with("K", k)
                    .estimate("survival", s.estimate())
            })
            .collect());
    }
    let (q, alpha, d) = (cfg.f64_list("q")?, cfg.f64("alpha")?, cfg.usize("d")?);
    let lambdas = cfg.nonempty_f64_list("lambda")?;
    let (t, n_env, method) = (cfg.f64("t")?, cfg.positive_u64("n_env")?, cfg.method()?);
    let (horizon, n_reps, caps) = (cfg.f64("horizon")?, cfg.positive_u64("n_reps")?, cfg.caps()?);
    let l_max = lambdas.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, kappa) in cfg.nonempty_f64_list("kappa")?.into_iter().enumerate() {
        let column = brwd_core::BrwParams::new(kappa, l_max, q.clone(), alpha, d)?;
        // one seed per column so survival is coupled along it
        let col_seed = seed::derive(cfg.seed, "column", i as u64);
        let coupled = column.q0() == 0.0;
        let freqs = if coupled {
            coupled_survival(&column, &lambdas, horizon, n_reps, caps, col_seed)?
        } else {
            lambdas
                .iter()
                .map(|&l| survival_frequency(&column.with_lambda(l)?, horizon, n_reps, caps, col_seed))
                .collect::<Result<Vec<_>, _>>()?
        };
        // the Lyapunov estimate does not depend on the branching law
        let lyap = estimate_lyapunov(kappa, alpha, d, t, n_env, method, false, &mut seed::rng_from(col_seed))?;
        for (&l, f) in lambdas.iter().zip(freqs) {
            let params = column.with_lambda(l)?;
            let v = PhaseVerdict::from_lyapunov(&params, lyap);
            out.push(
                phase_record(&v)
                    .with("kappa", kappa)
                    .with("lambda", l)
                    .with("malthus", params.malthus())
                    .with("coupled", coupled)
                    .estimate("survival", f.estimate.estimate())
                    .with("n_capped", f.n_capped),
            );
        }
    }
    Ok(out)
}

fn inequality_record(name: &str, c: &InequalityCheck, n_capped: u64) -> Record {
    Record::new("sfold")
        .with("inequality", name)
        .estimate("lhs", c.lhs)
        .estimate("rhs", c.rhs)
        .with("additive_stated", c.additive_stated)
        .with("additive_derived", c.additive_derived)
        .with("n_capped", n_capped)
        .with("pass", !c.violated)
}

fn boxes_fkg(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = cfg.params()?;
    let b = SpaceTimeBox::new(cfg.i32("L")?, cfg.f64("T")?, params.d)?;
    let origin = Site::origin(params.d);
    let eta1 = Configuration::single(origin, cfg.positive_u64("eta1")?);
    let eta2 = Configuration::single(origin, cfg.positive_u64("eta2")?);
    let (n_reps, caps) = (cfg.positive_u64("n_reps")?, cfg.caps()?);
    let suite = Functional::standard_suite(params.d);
    let mut out = Vec::new();
    for batch in 0..cfg.positive_u64("n_batches")? {
        let (pairs, n_capped) = paired_exit_counts(
            &params,
            &eta1,
            &eta2,
            &b,
            n_reps,
            caps,
            seed::derive(cfg.seed, "fkg", batch),
        )?;
        for (f, g) in &suite {
            let e = fkg_from_pairs(&pairs, f, g, n_capped);
            out.push(
                Record::new("fkg")
                    .with("batch", batch)
                    .with("f", f.to_string())
                    .with("g", g.to_string())
                    .estimate("cov", e.cov)
                    .with("mean_f", e.mean_f)
                    .with("mean_g", e.mean_g)
                    .with("n_used", e.n_used)
                    .with("n_capped", e.n_capped)
                    .with("pass", e.cov.value >= -3.0 * e.cov.std_err),
            );
        }
    }
    let s = cfg.u64("S")?;
    if s > 0 {
        let r = sfold_exit_check(
            &params,
            &eta1,
            &b,
            cfg.u64("k")?,
            cfg.u64("k_prime")?,
            s,
            n_reps,
            caps,
            seed::derive(cfg.seed, "sfold", 0),
        )?;
        out.push(inequality_record("top", &r.top, r.n_capped));
        out.push(inequality_record("faces", &r.faces, r.n_capped));
        out.push(inequality_record("totals", &r.totals, r.n_capped));
    }
    Ok(out)
}

fn correlation_records(out: &mut Vec<Record>, kind: &str, cs: &[PairCorrelation], row: usize, n: u64) {
    for c in cs {
        out.push(
            Record::new(kind)
                .with("row", row)
                .with("l1", c.l1)
                .with("l2", c.l2)
                .estimate("corr", c.corr)
                .with("degenerate", c.degenerate)
                .with("n_used", n)
                .with("pass", c.degenerate || c.corr.value.abs() <= 3.0 * c.corr.std_err),
        );
    }
}

fn perc(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let k = cfg.usize("K")?;
    let n_reps = cfg.positive_u64("n_reps")?;
    match cfg.str("mode") {
        "independent" => {
            let ps = cfg.nonempty_f64_list("p")?;
            let curve = independent_perc_curve(&ps, k, n_reps, cfg.seed)?;
            Ok(ps
                .iter()
                .zip(curve)
                .map(|(&p, s)| {
                    Record::new("independent")
                        .with("p", p)
                        .with("K", k)
                        .estimate("survival", s.estimate())
                })
                .collect())
        }
        "brw" => {
            let params = cfg.params()?;
            let construction = match cfg.str("construction") {
                "truncated" => Construction::Truncated,
                "direct" => Construction::Direct,
                other => {
                    return Err(CliError::config(
                        "construction",
                        format!("`{other}` is not one of truncated, direct"),
                    ))
                }
            };
            let pc = PercConfig::new(
                cfg.i32("L")?,
                cfg.f64("T")?,
                cfg.i32("n")?,
                cfg.positive_u64("S")?,
                k,
                construction,
            )?
            .with_caps(brwd_core::brw::Caps {
                max_alive: cfg.positive_u64("max_alive")?,
                max_events: cfg.positive_u64("max_events")?,
            });
            let row = cfg.usize("row")?;
            let mut out = Vec::new();
            if row == 0 {
                let (s, flagged) = brw_perc_survival(&params, &pc, n_reps, cfg.seed)?;
                out.push(
                    Record::new("brw")
                        .with("K", k)
                        .estimate("survival", s.estimate())
                        .with("n_flagged", flagged),
                );
            } else {
                let probe = dependence_range_probe(&params, &pc, row, n_reps, cfg.seed)?;
                correlation_records(&mut out, "conditional", &probe.conditional, row, probe.n_conditioned);
                // shared history makes these positive; reported, not checked
                let mut unc = Vec::new();
                correlation_records(&mut unc, "unconditional", &probe.unconditional, row, probe.n_reps);
                out.extend(unc.into_iter().map(|r| Record {
                    fields: r.fields.into_iter().filter(|(k, _)| k != "pass").collect(),
                }));
            }
            Ok(out)
        }
        other => Err(CliError::config(
            "mode",
            format!("`{other}` is not one of independent, brw"),
        )),
    }
}

fn verify(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    Ok(verify_suites(cfg.seed)
        .into_iter()
        .map(|s| {
            Record::new("suite")
                .with("suite", s.name)
                .with("cases", s.cases)
                .with("failures", s.failures)
                .with("detail", s.detail.clone())
                .with("passed", s.passed())
        })
        .collect())
}
