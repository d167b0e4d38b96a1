//! Flat `key = value` run configuration.
//!
//! Resolution order: experiment defaults, then the config file, then flags.
//! Unknown keys are rejected so that typos do not silently fall back to a
//! default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use brwd_core::brw::Caps;
use brwd_core::{BrwParams, SurvivalMethod};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Annealed,
    Lyapunov,
    BrwSurvival,
    MomentCheck,
    Embed,
    Phase,
    Sweep,
    BoxesFkg,
    Perc,
    Verify,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Annealed => "annealed",
            Experiment::Lyapunov => "lyapunov",
            Experiment::BrwSurvival => "brw-survival",
            Experiment::MomentCheck => "moment-check",
            Experiment::Embed => "embed",
            Experiment::Phase => "phase",
            Experiment::Sweep => "sweep",
            Experiment::BoxesFkg => "boxes-fkg",
            Experiment::Perc => "perc",
            Experiment::Verify => "verify",
        }
    }

    /// Keys the experiment reads, with their defaults. Later entries win.
    pub fn defaults(&self) -> Vec<(&'static str, &'static str)> {
        const MODEL: [(&str, &str); 5] = [
            ("kappa", "1"),
            ("lambda", "1"),
            ("q", "0,0,1"),
            ("alpha", "1"),
            ("d", "1"),
        ];
        const CAPS: [(&str, &str); 2] = [("max_alive", "1000000"), ("max_events", "100000000")];
        let (model, caps, own): (bool, bool, &[(&str, &str)]) = match self {
            Experiment::Annealed => (
                false,
                false,
                &[
                    ("kappa", "0.5,2,8"),
                    ("alpha", "1"),
                    ("d", "1,2"),
                    ("t", "0.5,1,2"),
                    ("n_samples", "100000"),
                ],
            ),
            Experiment::Lyapunov => (
                false,
                false,
                &[
                    ("kappa", "0.5,2,8"),
                    ("alpha", "1"),
                    ("d", "1"),
                    ("t", "20"),
                    ("n_env", "200"),
                    ("method", "quenched"),
                    ("n_walkers", "10000"),
                    ("pin", "false"),
                    ("concentration", "false"),
                ],
            ),
            Experiment::BrwSurvival => (
                true,
                true,
                &[("horizon", "10"), ("n_reps", "1000"), ("growth", "false")],
            ),
            Experiment::MomentCheck => (
                true,
                false,
                &[
                    ("q", "0.5,0,0.5"),
                    ("t", "2"),
                    ("n_fields", "50"),
                    ("n_reps", "2000"),
                    ("n_walkers", "20000"),
                ],
            ),
            Experiment::Embed => (
                true,
                false,
                &[
                    ("q", "0.5,0,0.5"),
                    ("T", "2"),
                    ("n_fields", "50"),
                    ("n_reps", "2000"),
                    ("n_walkers", "20000"),
                ],
            ),
            Experiment::Phase => (
                true,
                true,
                &[
                    ("t", "20"),
                    ("n_env", "200"),
                    ("method", "quenched"),
                    ("n_walkers", "10000"),
                    ("horizon", "50"),
                    ("n_reps", "1000"),
                ],
            ),
            Experiment::Sweep => (
                true,
                true,
                &[
                    ("kappa", "0.5,2,8"),
                    ("lambda", "0.5,1,2,4"),
                    ("p", ""),
                    ("K", "50"),
                    ("t", "20"),
                    ("n_env", "100"),
                    ("method", "quenched"),
                    ("n_walkers", "10000"),
                    ("horizon", "20"),
                    ("n_reps", "500"),
                ],
            ),
            Experiment::BoxesFkg => (
                true,
                true,
                &[
                    ("L", "3"),
                    ("T", "1.5"),
                    ("eta1", "2"),
                    ("eta2", "2"),
                    ("n_reps", "400"),
                    ("n_batches", "20"),
                    ("S", "0"),
                    ("k", "1"),
                    ("k_prime", "1"),
                ],
            ),
            Experiment::Perc => (
                true,
                false,
                &[
                    ("mode", "independent"),
                    ("lambda", "3"),
                    ("p", "0.5,0.6,0.7,0.8,0.9,0.95"),
                    ("K", "50"),
                    ("n_reps", "2000"),
                    ("L", "1"),
                    ("T", "0.4"),
                    ("n", "0"),
                    ("S", "3"),
                    ("construction", "truncated"),
                    ("row", "0"),
                    ("max_alive", "200000"),
                    ("max_events", "50000000"),
                ],
            ),
            Experiment::Verify => (false, false, &[]),
        };
        let mut v = Vec::new();
        if model {
            v.extend(MODEL);
        }
        if caps {
            v.extend(CAPS);
        }
        v.extend_from_slice(own);
        v
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        use Experiment::*;
        [
            Annealed,
            Lyapunov,
            BrwSurvival,
            MomentCheck,
            Embed,
            Phase,
            Sweep,
            BoxesFkg,
            Perc,
            Verify,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| CliError::config("experiment", format!("unknown experiment `{s}`")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config("config", format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults, overridden by `file` entries, overridden by `flags`.
    pub fn resolve(
        experiment: Experiment,
        file: Option<&Path>,
        flags: &[(String, String)],
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = experiment
            .defaults()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut seed_value = seed.map(|s| s.to_string());
        let mut layers = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
            layers.push(parse_flat(&text)?);
        }
        layers.push(flags.to_vec());
        for layer in &layers {
            for (k, v) in layer {
                match k.as_str() {
                    "experiment" => {
                        if v != experiment.name() {
                            return Err(CliError::config(
                                "experiment",
                                format!("file is for `{v}`, running `{experiment}`"),
                            ));
                        }
                    }
                    // an explicit --seed beats every layer
                    "seed" if seed.is_none() => seed_value = Some(v.clone()),
                    "seed" => {}
                    _ if values.contains_key(k) => {
                        values.insert(k.clone(), v.clone());
                    }
                    _ => return Err(CliError::config(k, format!("not a knob of `{experiment}`"))),
                }
            }
        }
        let seed = seed_value
            .ok_or_else(|| CliError::config("seed", "a seed is required (--seed or `seed =` in the config)"))?
            .parse::<u64>()
            .map_err(|e| CliError::config("seed", e.to_string()))?;
        Ok(RunConfig {
            experiment,
            seed,
            values,
        })
    }

    /// `(key, value)` pairs in key order, seed first.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("experiment".to_string(), self.experiment.name().to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        v.extend(self.values.iter().map(|(k, x)| (k.clone(), x.clone())));
        v
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("`{key}` is not a knob of `{}`", self.experiment))
    }

    fn parse<T: FromStr>(key: &str, s: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        s.trim()
            .parse::<T>()
            .map_err(|e| CliError::config(key, format!("`{s}`: {e}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let x: f64 = Self::parse(key, self.raw(key))?;
        if !x.is_finite() {
            return Err(CliError::config(key, "must be finite"));
        }
        Ok(x)
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        Self::parse(key, self.raw(key))
    }

    pub fn i32(&self, key: &str) -> Result<i32, CliError> {
        Self::parse(key, self.raw(key))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        Self::parse(key, self.raw(key))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        Self::parse(key, self.raw(key))
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    /// Comma-separated list; empty for an empty value.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let s = self.raw(key).trim();
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| {
                let v: f64 = Self::parse(key, x)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CliError::config(key, "entries must be finite"))
                }
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.raw(key).split(',').map(|x| Self::parse(key, x)).collect()
    }

    pub fn nonempty_f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.f64_list(key)?;
        if v.is_empty() {
            return Err(CliError::config(key, "must list at least one value"));
        }
        Ok(v)
    }

    pub fn positive_u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self.u64(key)?;
        if v == 0 {
            return Err(CliError::config(key, "must be >= 1"));
        }
        Ok(v)
    }

    pub fn params(&self) -> Result<BrwParams, CliError> {
        Ok(BrwParams::new(
            self.f64("kappa")?,
            self.f64("lambda")?,
            self.f64_list("q")?,
            self.f64("alpha")?,
            self.usize("d")?,
        )?)
    }

    pub fn caps(&self) -> Result<Caps, CliError> {
        Ok(Caps {
            max_alive: self.positive_u64("max_alive")?,
            max_events: self.positive_u64("max_events")?,
        })
    }

    pub fn method(&self) -> Result<SurvivalMethod, CliError> {
        match self.str("method") {
            "quenched" => Ok(SurvivalMethod::Quenched),
            "mc" => Ok(SurvivalMethod::MonteCarlo {
                n_walkers: self.positive_u64("n_walkers")?,
            }),
            other => Err(CliError::config(
                "method",
                format!("`{other}` is not one of quenched, mc"),
            )),
        }
    }
}
