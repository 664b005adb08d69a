use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use harmonic_cascade::config::parse_with_seed;
use harmonic_cascade::experiment::{run_experiment, RunError, EXIT_IO};

#[derive(Parser)]
#[command(version, about = "Cascaded harmonic generation: positive-P trajectories and fluctuation spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSV.
    Run {
        config: PathBuf,
        /// Directory the output path is resolved against.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Replace the seed given in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
    },
    /// Check a config file and print it with every default filled in.
    Validate { config: PathBuf },
}

fn fail(err: &RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, seed) = match &cli.command {
        Command::Run { config, seed, .. } => (config, *seed),
        Command::Validate { config } => (config, None),
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_IO as u8);
        }
    };
    let cfg = match parse_with_seed(&text, seed) {
        Ok(c) => c,
        Err(e) => return fail(&e.into()),
    };
    match cli.command {
        Command::Validate { .. } => {
            print!("{}", cfg.to_toml());
            ExitCode::SUCCESS
        }
        Command::Run { out, force, .. } => match run_experiment(&cfg, &out, force) {
            Ok(summary) => {
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                eprintln!("wrote {} rows to {}", summary.rows, summary.path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
