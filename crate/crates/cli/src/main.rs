//! `lab`: configuration-driven runner for the conelab experiments.
//!
//! Every subcommand reads an optional TOML config, writes `<stem>.json` (versioned report),
//! `<stem>.timings.json` and CSV plot tables into the output directory, and exits with
//! 0 when every verdict passes, 1 when one fails and 2 on configuration errors.

// validation uses the NaN-rejecting `!(x > y)` form
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod fields;
mod report;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Kind};
use report::Stopwatch;

#[derive(Parser)]
#[command(name = "lab", version, about = "Cone-harmonic, iteration and heat-smoothing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config (or a previous JSON report, whose config echo is re-run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output.dir`, else `lab-out`].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct CampanatoArgs {
    #[command(flatten)]
    common: Common,
    /// Coefficient A, e.g. `perturbed:convex_graph:1,1,1,holder:0.2:0.5`.
    #[arg(long)]
    coeff: Option<String>,
    /// Frozen coefficient Ā.
    #[arg(long)]
    frozen: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Mesh spacing of the ball lattice; sets cells per side to ⌈2/h⌉.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-section spectrum and homogeneity exponents.
    Spectrum(Common),
    /// Energy-average sweep of a cone harmonic, optionally against the FEM solver.
    ConeEnergy(Common),
    /// Dirichlet or Poisson solve with an energy sweep.
    Solve(Common),
    /// Dyadic frozen-coefficient iteration.
    Campanato(CampanatoArgs),
    /// Heat smoothing trace of a sampled field.
    HeatSmooth(Common),
    /// Heat-kernel envelope and mass check.
    KernelCheck(Common),
    /// Smoothed cutoff functions at several radii.
    Cutoff(Common),
    /// Very-weak sub/super/harmonic certificate.
    CheckVeryWeak(Common),
    /// Certificate, cutoff and smoothing pipeline for sampled harmonic data.
    WeylDemo(Common),
    /// Runs a manifest of configs and writes a summary.
    Suite(Common),
}

fn fail_config(e: &ConfigError) -> ExitCode {
    let body = serde_json::json!({ "error": "config", "field": e.field, "message": e.message });
    eprintln!("{body}");
    ExitCode::from(2)
}

fn init_workers(workers: Option<usize>) {
    if let Some(k) = workers {
        // only fails if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn load(common: &Common, kind: Kind) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::parse("", false)?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.resolve(Some(kind))
}

fn apply_campanato_flags(mut cfg: ExperimentConfig, a: &CampanatoArgs) -> Result<ExperimentConfig, ConfigError> {
    let s = cfg.campanato.as_mut().expect("resolved section");
    if let Some(c) = &a.coeff {
        s.coefficient = c.clone();
    }
    if let Some(c) = &a.frozen {
        s.frozen = c.clone();
    }
    if let Some(r) = a.rho {
        s.rho = Some(r);
    }
    if let Some(l) = a.levels {
        s.levels = l;
    }
    if let Some(h) = a.h {
        if !(h > 0.0 && h <= 1.0) {
            return Err(ConfigError::new("--h", "must lie in (0, 1]"));
        }
        s.cells = (2.0 / h).ceil() as usize;
    }
    cfg.resolve(None)
}

/// `--out`, then the config's `output.dir`, then `lab-out`. The flag is not echoed into the
/// report so that reruns into another directory stay byte-identical.
fn out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("lab-out"))
}

fn run_single(cfg: ExperimentConfig, dir: PathBuf) -> ExitCode {
    let mut clock = Stopwatch::start();
    match experiments::run(&cfg, &mut clock) {
        Ok(outcome) => match report::write_run(&dir, &cfg, &outcome, &clock) {
            Ok((path, passed)) => {
                for v in &outcome.verdicts {
                    println!(
                        "{} {}: {:.6e} ({} {:.3e}, margin {:.3e})",
                        if v.pass { "PASS" } else { "FAIL" },
                        v.name,
                        v.value,
                        v.relation,
                        v.tolerance,
                        v.margin
                    );
                }
                println!("report: {}", path.display());
                if passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("{}", serde_json::json!({ "error": "io", "message": format!("{e:#}") }));
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.message() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, kind) = match &cli.command {
        Command::Spectrum(c) => (c, Some(Kind::Spectrum)),
        Command::ConeEnergy(c) => (c, Some(Kind::ConeEnergy)),
        Command::Solve(c) => (c, Some(Kind::Solve)),
        Command::Campanato(a) => (&a.common, Some(Kind::Campanato)),
        Command::HeatSmooth(c) => (c, Some(Kind::HeatSmooth)),
        Command::KernelCheck(c) => (c, Some(Kind::KernelCheck)),
        Command::Cutoff(c) => (c, Some(Kind::Cutoff)),
        Command::CheckVeryWeak(c) => (c, Some(Kind::CheckVeryWeak)),
        Command::WeylDemo(c) => (c, Some(Kind::WeylDemo)),
        Command::Suite(c) => (c, None),
    };
    let Some(kind) = kind else {
        return suite::run_suite(common.config.as_deref(), common.out.as_deref(), common.seed, common.workers);
    };
    init_workers(common.workers);
    let cfg = load(common, kind).and_then(|cfg| match &cli.command {
        Command::Campanato(a) => apply_campanato_flags(cfg, a),
        _ => Ok(cfg),
    });
    match cfg {
        Ok(cfg) => {
            let dir = out_dir(common.out.as_deref(), &cfg);
            run_single(cfg, dir)
        }
        Err(e) => fail_config(&e),
    }
}
