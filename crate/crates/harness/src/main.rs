use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sao_harness::{report_summary, run, selftest, ConfigPatch, ExperimentConfig, ExperimentKind, HarnessError};

/// Seeded experiments on the stochastic Airy operator.
///
/// Exit status: 0 when every gated test passes, 1 on a test failure or a
/// runtime error, 2 on a usage error.
#[derive(Parser)]
#[command(name = "sao", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bottom eigenvalues with a Gumbel fit of the ground state.
    Spectrum(RunArgs),
    /// Explosion times of the Riccati diffusion.
    Explosions(RunArgs),
    /// First explosion times against the exponential law.
    Mckean(RunArgs),
    /// Counts on the exponential-quantile grid.
    Poisson(RunArgs),
    /// Eigenfunction and environment profiles.
    Shape(RunArgs),
    /// Tridiagonal ensemble edge against the operator.
    EnsembleEdge(RunArgs),
    /// Ornstein–Uhlenbeck exit-time transform.
    OuExit(RunArgs),
    /// Quick deterministic and reproducibility checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with any of the flag settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    patch: ConfigPatch,
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<bool, HarnessError> {
    let base = match &args.config {
        Some(p) => ConfigPatch::from_file(p)?,
        None => ConfigPatch::default(),
    };
    let cfg = ExperimentConfig::from_patch(kind, base.overlay(args.patch))?;
    let report = run(&cfg)?;
    print!("{}", report_summary(&report));
    println!("{} replicas ({} failed) in {:.1} s", report.records.len(), report.failed_replicas, report.wall_time_s);
    if let Some(out) = &cfg.out {
        println!("report written to {}", out.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Selftest => {
            let r = selftest::selftest();
            print!("{}", r.render());
            return if r.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Explosions(a) => (ExperimentKind::Explosions, a),
        Command::Mckean(a) => (ExperimentKind::Mckean, a),
        Command::Poisson(a) => (ExperimentKind::Poisson, a),
        Command::Shape(a) => (ExperimentKind::Shape, a),
        Command::EnsembleEdge(a) => (ExperimentKind::EnsembleEdge, a),
        Command::OuExit(a) => (ExperimentKind::OuExit, a),
    };
    match execute(kind.0, kind.1) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
