//! `brwd`: batch experiments for the branching random walk among disasters.
//!
//! Every subcommand reads a flat `key = value` configuration (defaults, then
//! `--config`, then knob arguments). A knob can be given as `--kappa 2`,
//! `--kappa=2`, `--set kappa=2` or a bare `kappa=2`. Records go
//! to `--out` or stdout as CSV or JSON; timing goes to stderr only so that
//! outputs are byte-identical across runs and thread counts.

mod config;
mod error;
mod experiments;
mod record;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Experiment, RunConfig};
use error::{exit, CliError};

#[derive(Parser, Debug)]
#[command(name = "brwd", version, about = "Branching random walk among disasters: experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads (rayon default if absent). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
struct Knobs {
    /// Override one knob, `KEY=VALUE`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Knob overrides as bare `KEY=VALUE` (or `--KEY VALUE`); `--show-config` lists the knobs.
    #[arg(value_name = "KEY=VALUE")]
    pairs: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Walker survival with fresh environments against exp(-alpha t).
    Annealed(Knobs),
    /// Quenched Lyapunov exponent p(kappa) and the spread of log S(t).
    Lyapunov(Knobs),
    /// Survival frequency of the branching process against horizon.
    BrwSurvival(Knobs),
    /// First-moment identity per environment.
    MomentCheck(Knobs),
    /// Embedded branching process: mean identity and nonextinction bound.
    Embed(Knobs),
    /// Phase verdict from the sign of lambda(m-1) + p(kappa), with survival.
    Phase(Knobs),
    /// Phase diagram over a kappa by lambda grid, or a percolation curve.
    Sweep(Knobs),
    /// Covariance of increasing exit functionals and the S-fold inequalities.
    BoxesFkg(Knobs),
    /// Oriented percolation built from the process, or independent percolation.
    Perc(Knobs),
    /// Exact oracle suites; exit status 2 on any mismatch.
    Verify(Knobs),
}

impl Command {
    fn split(&self) -> (Experiment, &Knobs) {
        match self {
            Command::Annealed(k) => (Experiment::Annealed, k),
            Command::Lyapunov(k) => (Experiment::Lyapunov, k),
            Command::BrwSurvival(k) => (Experiment::BrwSurvival, k),
            Command::MomentCheck(k) => (Experiment::MomentCheck, k),
            Command::Embed(k) => (Experiment::Embed, k),
            Command::Phase(k) => (Experiment::Phase, k),
            Command::Sweep(k) => (Experiment::Sweep, k),
            Command::BoxesFkg(k) => (Experiment::BoxesFkg, k),
            Command::Perc(k) => (Experiment::Perc, k),
            Command::Verify(k) => (Experiment::Verify, k),
        }
    }
}

fn knob_pairs(k: &Knobs) -> Result<Vec<(String, String)>, CliError> {
    k.set
        .iter()
        .chain(&k.pairs)
        .map(|s| {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| CliError::config(s.as_str(), "expected KEY=VALUE"))?;
            Ok((key.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}

fn write_records(cli: &Cli, records: &[record::Record], echo: &[(String, String)]) -> Result<(), CliError> {
    let mut w: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.format {
        Format::Csv => record::write_csv(&mut w, records, echo)?,
        Format::Json => record::write_json(&mut w, records, echo)?,
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let (experiment, knobs) = cli.command.split();
    let cfg = RunConfig::resolve(experiment, cli.config.as_deref(), &knob_pairs(knobs)?, cli.seed)?;
    let echo = cfg.echo();
    if cli.show_config {
        for (k, v) in &echo {
            println!("{k} = {v}");
        }
        return Ok(exit::OK);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let start = Instant::now();
    let records = experiments::run(&cfg)?;
    eprintln!(
        "brwd {experiment}: seed {} records {} threads {} wall {:.3}s",
        cfg.seed,
        records.len(),
        rayon::current_num_threads(),
        start.elapsed().as_secs_f64()
    );
    write_records(cli, &records, &echo)?;
    let failed = records.iter().filter(|r| r.failed()).count();
    if experiment == Experiment::Verify {
        let bad = records
            .iter()
            .filter(|r| matches!(r.get("passed"), Some(record::Value::Bool(false))))
            .count();
        if bad > 0 {
            eprintln!("brwd verify: {bad} suite(s) failed");
            return Ok(exit::ORACLE);
        }
    }
    if failed > 0 {
        eprintln!("brwd {experiment}: {failed} record(s) failed their statistical check");
        return Ok(exit::STATISTICAL);
    }
    Ok(exit::OK)
}

const GLOBAL_FLAGS: &[&str] = &[
    "config",
    "seed",
    "out",
    "format",
    "threads",
    "show-config",
    "set",
    "help",
    "version",
];

/// Rewrite `--KEY VALUE` and `--KEY=VALUE` into `--set KEY=VALUE` for the
/// knobs of the chosen subcommand.
fn expand_knob_flags(args: Vec<String>) -> Vec<String> {
    let Some(experiment) = args.iter().skip(1).find_map(|a| a.parse::<Experiment>().ok()) else {
        return args;
    };
    let keys: Vec<&str> = experiment.defaults().into_iter().map(|(k, _)| k).collect();
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if GLOBAL_FLAGS.contains(&name.as_str()) || !keys.contains(&name.as_str()) {
            out.push(a);
            continue;
        }
        match inline.or_else(|| it.next()) {
            Some(v) => {
                out.push("--set".into());
                out.push(format!("{name}={v}"));
            }
            None => out.push(a),
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_knob_flags(std::env::args().collect()));
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("brwd: {e}");
            ExitCode::from(exit::CONFIG as u8)
        }
    }
}
