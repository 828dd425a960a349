use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use thinlayer::study::{self, StudyConfig, StudyKind};

#[derive(Parser)]
#[command(
    name = "thinlayer",
    version,
    about = "Thin-membrane field solver and convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolved and asymptotic solve at the first configured thickness.
    Solve(Common),
    /// Error rates over the configured thickness sweep.
    Converge(Common),
    /// Small-z_m study: perturbation in |z_m| and the z_m = 0 asymptotics in h.
    ZmSweep(Common),
    /// Neumann data on the membrane of an isolated cell.
    CellNeumann(Common),
    /// Scheme order, degeneracy, jump-form agreement and invariant checks.
    Diagnostics(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` or JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(kind: StudyKind, args: Common) -> thinlayer::Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    cfg.kind = kind;
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let outcome = study::run(&cfg)?;
    study::write_outcome(&outcome, &out)?;
    for c in &outcome.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("reports written to {}", out.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Solve(a) => (StudyKind::Single, a),
        Command::Converge(a) => (StudyKind::Converge, a),
        Command::ZmSweep(a) => (StudyKind::ZmSweep, a),
        Command::CellNeumann(a) => (StudyKind::CellNeumann, a),
        Command::Diagnostics(a) => (StudyKind::Diagnostics, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
