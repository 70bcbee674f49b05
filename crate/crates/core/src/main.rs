use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use necklace::cli::{run, Mode, Overrides, RunConfig};

/// Integrated density of states and Lyapunov exponent of the random necklace.
#[derive(Debug, Parser)]
#[command(name = "necklace", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    mode: Mode,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of energy grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Loops per chain.
    #[arg(long)]
    chain: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output CSV path; plots go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        seed: args.seed,
        points: args.points,
        chain: args.chain,
        realizations: args.realizations,
        out: args.out,
        workers: args.workers,
    };
    let result = RunConfig::load(&args.config).and_then(|mut config| {
        config.apply(&overrides)?;
        run(&config, args.mode)
    });
    match result {
        Ok(report) => {
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("necklace: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
