use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pfinsler::cli::{load_config, run, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Stratum raster CSV.
    Classify,
    /// SVG phase portrait.
    Portrait,
    /// One trace CSV per seed.
    Integrate,
    /// Singular curves, spectra and tangencies.
    Singular,
    /// Order-by-order series report.
    Puiseux,
    /// Identity and oracle checks; exits 1 on any failure.
    Verify,
}

#[derive(Debug, Parser)]
#[command(version, about = "Geodesic flows of polynomial pseudo-Finsler metrics")]
struct Args {
    command: Cmd,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the `out` key of the scenario).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a scenario key, e.g. `--seed param.alpha=-1` or `--seed "seed=0 0 1"`.
    #[arg(long = "seed", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load_config(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let command = match args.command {
        Cmd::Classify => Command::Classify,
        Cmd::Portrait => Command::Portrait,
        Cmd::Integrate => Command::Integrate,
        Cmd::Singular => Command::Singular,
        Cmd::Puiseux => Command::Puiseux,
        Cmd::Verify => Command::Verify,
    };
    let out = args.out.unwrap_or_else(|| cfg.out.clone());
    match run(command, &cfg, &out) {
        Ok(o) => {
            println!("{}", o.report);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
