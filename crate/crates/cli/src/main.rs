use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dynrisk_cli::{run, validate, Overrides};

/// Runs a dynamic risk experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "dynrisk", version)]
struct Args {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only check the config and list every problem found.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.validate_only {
        return match validate(&args.config) {
            Ok(d) if d.is_empty() => {
                println!("{}: ok", args.config.display());
                ExitCode::SUCCESS
            }
            Ok(d) => {
                for diag in &d {
                    eprintln!("{}: {diag}", args.config.display());
                }
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
    };
    match run(&args.config, &overrides) {
        Ok(summary) => {
            println!("{}: report written to {}", summary.report.task, summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
