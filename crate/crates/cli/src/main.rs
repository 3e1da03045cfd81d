//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rage_cli::config::{load_config, ExperimentConfig, ExperimentKind};
use rage_cli::experiments::{run_experiment, verify_suite, write_outputs};
use rage_cli::serialize::read_state;

#[derive(Parser)]
#[command(
    name = "rage",
    about = "Variational engine for graph-enhanced matrix product states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lattice ground-state benchmark from a config file.
    GroundState {
        /// TOML config file; defaults apply for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted key=value overrides applied on top of the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the random-circuit fidelity benchmark from a config file.
    Circuit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the efficient contractions against the dense oracle.
    Verify {
        /// Number of random instances.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Print a summary of a serialized state file.
    Show { path: PathBuf },
}

fn load(config: Option<PathBuf>, set: &[String]) -> Result<ExperimentConfig, String> {
    let text = match config {
        Some(path) => std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        None => String::new(),
    };
    load_config(&text, set)
}

fn run_configured(
    config: Option<PathBuf>,
    set: &[String],
    out: Option<PathBuf>,
    expect: ExperimentKind,
) -> ExitCode {
    let mut cfg = match load(config, set) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(1);
        }
    };
    if cfg.experiment != expect {
        // the subcommand wins over the config's experiment field
        cfg.experiment = expect;
        if let Err(msg) = cfg.validate() {
            eprintln!("config error: {msg}");
            return ExitCode::from(1);
        }
    }
    if let Some(dir) = out {
        cfg.output_dir = dir.display().to_string();
    }
    let records = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("numerical failure: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = PathBuf::from(&cfg.output_dir);
    if let Err(e) = write_outputs(&dir, &cfg, &records) {
        eprintln!("cannot write outputs to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    println!(
        "wrote {} result rows to {}",
        records.len(),
        dir.join("results.csv").display()
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::GroundState { config, set, out } => {
            run_configured(config, &set, out, ExperimentKind::Ising2d)
        }
        Command::Circuit { config, set, out } => {
            run_configured(config, &set, out, ExperimentKind::RandomCircuit)
        }
        Command::Verify { seeds } => {
            let failures = verify_suite(seeds);
            if failures.is_empty() {
                println!("verify: {seeds} instances checked against the dense oracle, all agree");
                ExitCode::SUCCESS
            } else {
                for f in &failures {
                    eprintln!("verify: {f}");
                }
                eprintln!("verify: {} failure(s)", failures.len());
                ExitCode::from(2)
            }
        }
        Command::Show { path } => match read_state(&path) {
            Ok(state) => {
                let n = state.n_sites();
                println!(
                    "sites: {n}, bond dimension: {}, boundary: {:?}",
                    state.mps.bond_dim(),
                    state.mps.boundary()
                );
                match state.norm_sq() {
                    Ok(norm) => println!("norm^2: {norm}"),
                    Err(e) => println!("norm^2: unavailable ({e})"),
                }
                let edges = state.phi.edges().count();
                println!("graph edges with nonzero phase: {edges}");
                println!(
                    "rotations: {}",
                    if state.rotations_are_identity() {
                        "identity"
                    } else if state.rotations_unitary() {
                        "unitary"
                    } else {
                        "non-unitary"
                    }
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("cannot load state: {e}");
                ExitCode::from(1)
            }
        },
    }
}
