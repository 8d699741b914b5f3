use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hartree_harness::{run, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "hartree", version, about = "Pseudospectral Hartree scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strang evolution with diagnostics and conservation checks.
    Evolve(Common),
    /// Asymptotic-state extraction at the configured checkpoints.
    Scatter(Common),
    /// u0 -> u+ -> Omega u+ round trip with Richardson estimate.
    Roundtrip(Common),
    /// Morawetz inequality and decay checks along a trajectory.
    Morawetz(Common),
    /// Cartesian sweep over gamma, strength and amplitude.
    Sweep(Common),
    /// Hypothesis checks and admissible exponent windows of the potential.
    CheckPotential(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, env = "HS_THREADS")]
    threads: Option<usize>,
    /// Seed for random initial data (overrides `initial.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.command {
        Command::Evolve(c) => (ExperimentKind::Evolve, c),
        Command::Scatter(c) => (ExperimentKind::Scatter, c),
        Command::Roundtrip(c) => (ExperimentKind::Roundtrip, c),
        Command::Morawetz(c) => (ExperimentKind::Morawetz, c),
        Command::Sweep(c) => (ExperimentKind::Sweep, c),
        Command::CheckPotential(c) => (ExperimentKind::CheckPotential, c),
    };
    let ov = Overrides { out: c.out, threads: c.threads, seed: c.seed };
    ExitCode::from(run(kind, &c.config, &ov) as u8)
}
