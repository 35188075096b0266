use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spade_bounds::config::{ExperimentConfig, Figure};
use spade_bounds::figures;
use spade_bounds::Error;

#[derive(Parser)]
#[command(version, about = "Cramer-Rao bounds and SPADE Monte Carlo datasets for two-source resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the figures selected by a config file and write CSV datasets.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Figure name or `all`; overrides the config.
        #[arg(long)]
        figure: Option<String>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo trials per grid point.
        #[arg(long)]
        trials: Option<u64>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let Command::Run {
        config,
        figure,
        out,
        seed,
        trials,
    } = Cli::parse().command;

    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(f) = figure {
        cfg.figure = f;
    }
    if let Some(o) = out {
        // Flag paths are relative to the working directory, not the config.
        cfg.out = std::env::current_dir().map(|d| d.join(&o)).unwrap_or(o);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    let base = config.parent().map(PathBuf::from).unwrap_or_default();
    let mut numeric_failure = false;
    for f in cfg.figures() {
        let result = figures::compute_figure(f, &cfg, &base).and_then(|data| {
            let out = if cfg.out.is_relative() { base.join(&cfg.out) } else { cfg.out.clone() };
            figures::write_figure(&data, &cfg, &out)
        });
        match result {
            Ok(summary) => {
                println!("{}: {} files", Figure::name(&f), summary.files.len());
                for c in &summary.failed_curves {
                    eprintln!("{}: every point of curve `{c}` failed", f.name());
                    numeric_failure = true;
                }
            }
            Err(e @ Error::Config { .. }) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            Err(e) => {
                eprintln!("{}: {e}", f.name());
                numeric_failure = true;
            }
        }
    }
    if numeric_failure {
        ExitCode::from(EXIT_NUMERIC)
    } else {
        ExitCode::SUCCESS
    }
}
