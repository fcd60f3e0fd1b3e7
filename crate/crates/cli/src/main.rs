use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pclamb::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "pclamb", version, about = "Lamb shifts of atoms in inverse-opal photonic crystals")]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Ensemble RNG seed (overrides [ensemble] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Band frequencies on the mesh and the complete gap.
    Bands,
    /// Local spectral response function at the configured positions.
    Lsrf,
    /// Principal and normal integrals versus detuning.
    Beta,
    /// Level shifts across the lattice-constant sweep.
    Shift,
    /// Shift distribution over randomly placed atoms.
    Ensemble,
    /// Emission line shapes.
    Lineshape,
    /// Mesh, cutoff and optical-cutoff convergence studies.
    Convergence,
    /// Print the effective configuration as TOML.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    }
    let report = match cli.command {
        Command::Config => {
            cfg.validate()?;
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Bands => commands::run_bands(&cfg)?,
        Command::Lsrf => commands::run_lsrf(&cfg)?,
        Command::Beta => commands::run_beta(&cfg)?,
        Command::Shift => commands::run_shift_sweep(&cfg)?,
        Command::Ensemble => commands::run_ensemble(&cfg)?,
        Command::Lineshape => commands::run_lineshape(&cfg)?,
        Command::Convergence => commands::run_convergence(&cfg)?,
    };
    for f in &report.files {
        println!("{}", f.display());
    }
    println!("{}", report.metadata.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
