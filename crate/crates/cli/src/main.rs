use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use greenline_cli::config::{load_config, Shuffle};
use greenline_cli::runner::{execute, Outcome};

/// Output-directory override honored between `--out` and the config file.
const OUT_ENV: &str = "GREENLINE_OUT";

#[derive(Parser)]
#[command(
    name = "greenline",
    about = "Online learning of time functions by exact impulsive integration, \
             with Green's-function batch solves and a graph-augmented variant",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a run configuration and write CSV artifacts.
    ///
    /// Exit codes: 0 success, 1 operational failure, 2 the run diverged
    /// (artifacts are still written and flagged).
    Run {
        /// Path to the JSON run configuration.
        config: PathBuf,
        /// Output directory (overrides GREENLINE_OUT and the config file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the shuffle seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a configuration without running it.
    Validate {
        /// Path to the JSON run configuration.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("config ok: {} mode", cfg.mode.as_str());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                match &mut cfg.shuffle {
                    Shuffle::None => {
                        eprintln!("note: --seed ignored, config does not shuffle");
                    }
                    Shuffle::Once { seed: s } | Shuffle::PerEpoch { seed: s } => *s = seed,
                }
            }
            let out_dir = out
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            match execute(&cfg, &out_dir)? {
                Outcome::Clean => {
                    println!("run complete: artifacts in {}", out_dir.display());
                    Ok(ExitCode::SUCCESS)
                }
                Outcome::Diverged => {
                    println!(
                        "run diverged: artifacts in {} (diverged=true)",
                        out_dir.display()
                    );
                    Ok(ExitCode::from(2))
                }
            }
        }
    }
}
