use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specnoise::{execute, render_csv, CliError, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "specnoise", version, about = "Monte Carlo experiments for eigenvector perturbations of signal-plus-noise matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides the config's base_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (overridden by SPECNOISE_THREADS).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run entrywise noise-concentration diagnostics for the config's model,
    /// regardless of the config's experiment kind.
    CheckAssumptions {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render a figure from a previously produced CSV.
    Render {
        csv: PathBuf,
        /// Figure kind: "scatter" (v1/v2 columns) or "curve" (aggregate columns).
        #[arg(long)]
        kind: String,
        /// Output SVG path (defaults to the CSV path with .svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specnoise: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let config = load_config(&config)?;
            let summary = execute(
                config,
                &Overrides {
                    out_dir: out,
                    seed,
                    threads,
                },
            )?;
            for file in &summary.files {
                println!("{}", file.display());
            }
            report_failures(&summary.manifest.failures);
            Ok(())
        }
        Command::CheckAssumptions {
            config,
            out,
            seed,
            threads,
        } => {
            let mut config = load_config(&config)?;
            config.kind = ExperimentKind::AssumptionCheck;
            let summary = execute(
                config,
                &Overrides {
                    out_dir: out,
                    seed,
                    threads,
                },
            )?;
            for file in &summary.files {
                println!("{}", file.display());
            }
            report_failures(&summary.manifest.failures);
            Ok(())
        }
        Command::Render { csv, kind, out } => {
            let path = render_csv(&csv, &kind, out.as_deref())?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&bytes)
}

fn report_failures(failures: &[specnoise::manifest::ReplicateFailure]) {
    for failure in failures {
        eprintln!(
            "warning: replicate {} at n = {} failed: {}",
            failure.replicate, failure.n, failure.message
        );
    }
}
