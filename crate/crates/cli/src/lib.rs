//! The `rstokes` command line: configuration, subcommand dispatch and
//! artifact writing.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{config_hash, load, validate};
use output::{write_atomic, Sink, Summary};

pub const OUT_ENV: &str = "RSTOKES_OUT";

#[derive(Debug, Parser)]
#[command(name = "rstokes", version, about = "Relaxation, resolvent, mild-solution and source-recovery runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir` and the environment).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set kernel.alpha=0.7`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Shorthand for `--set grid.steps=N`.
    #[arg(long, global = true, value_name = "N")]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Relaxation functions for every eigenvalue and their property report.
    Relax,
    /// Mild solution by Picard iteration, hypothesis checks and Hölder estimate.
    Solve,
    /// Relaxation properties and resolvent bounds on seeded random data.
    Verify,
    /// Kernel certificates.
    Certify,
    /// Source amplitude recovery from a measurement.
    Inverse,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Relax => "relax",
            Self::Solve => "solve",
            Self::Verify => "verify",
            Self::Certify => "certify",
            Self::Inverse => "inverse",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

fn output_dir(cli: &Cli, configured: Option<&str>, base: &Path) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    if let Some(d) = configured {
        return config::resolve(base, d);
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("rstokes-out"),
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let (text, base) = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => (t, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return EXIT_INVALID;
            }
        },
        None => (String::new(), PathBuf::from(".")),
    };
    let mut overrides = cli.set.clone();
    if let Some(n) = cli.grid {
        overrides.push(format!("grid.steps={n}"));
    }
    let (raw, canonical) = match load(&text, &overrides) {
        Ok(v) => v,
        Err(e) => {
            eprint!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let setup = match validate(&raw, &base) {
        Ok(s) => s,
        Err(e) => {
            eprint!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let dir = output_dir(cli, raw.output.dir.as_deref(), &base);
    let mut sink = Sink::new(dir.clone(), cli.quiet);
    let result = match cli.command {
        Command::Relax => commands::relax(&setup, &raw, &mut sink),
        Command::Solve => commands::solve(&setup, &raw, &mut sink),
        Command::Verify => commands::verify(&setup, &raw, &mut sink),
        Command::Certify => commands::certify(&setup, &raw, &mut sink),
        Command::Inverse => commands::inverse(&setup, &raw, &base, &mut sink),
    };
    let (code, status) = match result {
        Ok(()) => (EXIT_OK, "ok".to_string()),
        Err(Failure::Config(e)) => {
            eprint!("error: {e}");
            return EXIT_INVALID;
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: writing to {}: {e}", dir.display());
            return EXIT_INVALID;
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            sink.messages.push(m);
            (EXIT_INVALID, "error".to_string())
        }
        Err(Failure::NonConvergence(m)) => {
            eprintln!("error: {m}");
            sink.messages.push(m);
            (EXIT_NONCONVERGENCE, "nonconvergence".to_string())
        }
    };
    let summary = Summary {
        tool: "rstokes",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().into(),
        status,
        config_sha256: config_hash(&canonical),
        seed: raw.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: sink.artifacts.clone(),
        certificates: sink.certificates.clone(),
        messages: sink.messages.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Err(e) = write_atomic(&dir.join("summary.json"), &json) {
        eprintln!("error: writing summary to {}: {e}", dir.display());
        return EXIT_INVALID;
    }
    code
}
