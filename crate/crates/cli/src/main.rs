use std::path::PathBuf;
use std::process::ExitCode;

use cellsec_cli::{load_spec, run_experiment, RunError, RunOptions};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cellsec",
    version,
    about = "Secrecy of multi-antenna cellular downlinks: sweeps and validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<name>.csv` and `<name>.summary.json`.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (all cores by default).
        #[arg(long, env = "CELLSEC_WORKERS")]
        workers: Option<usize>,
        /// Overrides `mc.seed` of the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check an experiment spec without running it.
    Validate { spec: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { spec } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let diags = spec.diagnostics();
            if diags.is_empty() {
                println!("ok");
                return ExitCode::SUCCESS;
            }
            for d in &diags {
                println!("{d}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Command::Run {
            spec,
            out,
            workers,
            seed,
        } => {
            if workers == Some(0) {
                eprintln!("error: --workers must be at least 1");
                return ExitCode::from(EXIT_CONFIG);
            }
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run_experiment(&spec, &out, &RunOptions { workers, seed }) {
                Ok(report) => {
                    for f in &report.failures {
                        eprintln!("failed: {}: {}", f.context, f.message);
                    }
                    eprintln!("{} rows -> {}", report.rows, report.csv_path.display());
                    ExitCode::from(report.exit_code())
                }
                Err(RunError::Config(diags)) => {
                    for d in &diags {
                        eprintln!("error: {d}");
                    }
                    ExitCode::from(EXIT_CONFIG)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
