//! Batch experiment runner: parses run configurations, executes replica
//! ensembles, persists trajectories and diagnostics, and ships the preset
//! experiments used by the acceptance suite.

mod diagnose;
mod presets;
mod runner;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kslab::diagnostics::{bessel_dimension, classify_regimes, Regime};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "kslab",
    version,
    about = "Interacting-particle chemotaxis laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Which dynamics a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    /// N-particle system with regularized (optionally cutoff) drift.
    Particles,
    /// Cubed pair process stepped by the explicit Euler scheme.
    Pair,
    /// Pair process built from exact radial transitions plus the angular
    /// construction (usable from a zero start, unlike the Euler scheme).
    PairExact,
    /// Mass-carrying cluster dynamics with sticky merges.
    Clusters,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Particles => "particles",
            SystemKind::Pair => "pair",
            SystemKind::PairExact => "pair-exact",
            SystemKind::Clusters => "clusters",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "particles" => Ok(SystemKind::Particles),
            "pair" => Ok(SystemKind::Pair),
            "pair-exact" => Ok(SystemKind::PairExact),
            "clusters" => Ok(SystemKind::Clusters),
            other => bail!("unknown system kind '{other}'"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config (a SimParams object, or an
    /// array of them for a sweep).
    Simulate {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output root; defaults to $KSLAB_OUT.
        #[arg(long, env = "KSLAB_OUT")]
        out: PathBuf,
        /// Replica-level parallelism (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Allow overwriting an existing run directory.
        #[arg(long)]
        overwrite: bool,
        /// Experiment name; defaults to the config file stem.
        #[arg(long)]
        name: Option<String>,
        /// Which dynamics the config drives.
        #[arg(long, value_enum, default_value = "particles")]
        system: SystemKind,
        /// Snapshot stride in steps (default sized for about 1000
        /// snapshots per replica).
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Print a named preset configuration to stdout.
    Preset {
        #[arg(long)]
        name: String,
    },
    /// Recompute a diagnostics suite from a stored run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        suite: String,
    },
    /// Print the collision-regime table for (N, χ).
    Regimes {
        #[arg(long)]
        n: usize,
        /// Sensitivity χ; plain number or a multiple of π like "6.5pi".
        #[arg(long)]
        chi: String,
    },
}

/// Accepts "20.4" or "6.5pi"/"6.5π".
pub fn parse_chi(text: &str) -> Result<f64> {
    let t = text.trim();
    let (body, pi) = if let Some(stripped) = t.strip_suffix("pi") {
        (stripped, true)
    } else if let Some(stripped) = t.strip_suffix('π') {
        (stripped, true)
    } else {
        (t, false)
    };
    let base: f64 = if body.is_empty() && pi {
        1.0
    } else {
        body.parse()
            .with_context(|| format!("cannot parse chi from '{text}'"))?
    };
    let chi = if pi {
        base * std::f64::consts::PI
    } else {
        base
    };
    if !(chi.is_finite() && chi > 0.0) {
        bail!("chi must be positive, got {chi}");
    }
    Ok(chi)
}

fn print_regimes(n: usize, chi: f64) -> Result<()> {
    let table = classify_regimes(n, chi).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "N = {n}, chi = {chi:.6} ({:.4} pi)",
        chi / std::f64::consts::PI
    );
    match table.roots {
        Some((lo, hi)) => println!("dimension-2 roots: x- = {lo:.6}, x+ = {hi:.6}"),
        None => println!("dimension-2 roots: none (dimension stays below 2)"),
    }
    println!("{:>4} {:>12} regime", "k", "dimension");
    for k in 2..=n {
        let regime = match table.regime(k) {
            Regime::NoCollision => "no_collision",
            Regime::Reflecting => "reflecting",
            Regime::Sticky => "sticky",
        };
        println!("{k:>4} {:>12.6} {regime}", bessel_dimension(n, chi, k));
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            jobs,
            overwrite,
            name,
            system,
            record_every,
        } => {
            let name = name.unwrap_or_else(|| {
                config
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "run".into())
            });
            runner::run_experiment(&config, &out, &name, system, jobs, overwrite, record_every)
        }
        Command::Preset { name } => presets::print_preset(&name),
        Command::Diagnose { run, suite } => diagnose::run_suite(&run, &suite),
        Command::Regimes { n, chi } => parse_chi(&chi).and_then(|chi| print_regimes(n, chi)),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
