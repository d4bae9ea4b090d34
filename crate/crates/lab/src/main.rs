use std::path::PathBuf;
use std::process::ExitCode;

use antithetic_lab::{run, ExperimentConfig, LabError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "antithetic-lab", version, about = "Antithetic noise experiments on analytic diffusion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PN vs RR pair correlations
    Correlation(RunArgs),
    /// Confidence intervals and efficiency at equal budget
    Uq(RunArgs),
    /// RQMC replicate/point splits at fixed budget
    QmcTradeoff(RunArgs),
    /// Antisymmetry scores, temporal correlations, symmetry centers
    Symmetry(RunArgs),
    /// Fisher-information and spectral decay, one-step bound, symmetry preservation
    Ou(RunArgs),
    /// Monotone-map correlations and DDIM monotonicity checks
    Fkg(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn execute(kind: &str, args: &RunArgs) -> Result<(), LabError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.experiment.kind() != kind {
        return Err(LabError::config("experiment.kind", format!("config describes `{}` but the `{kind}` subcommand was used", config.experiment.kind())));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let manifest = run(&config, &args.out, args.threads)?;
    println!("{} run written to {} ({} artifacts)", manifest.experiment, args.out.display(), manifest.artifacts.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Correlation(a) => ("correlation", a),
        Command::Uq(a) => ("uq", a),
        Command::QmcTradeoff(a) => ("qmc-tradeoff", a),
        Command::Symmetry(a) => ("symmetry", a),
        Command::Ou(a) => ("ou", a),
        Command::Fkg(a) => ("fkg", a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
