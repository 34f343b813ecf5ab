//! `sinrlab`: batch runner for SINR percolation experiments.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse, registry_text, ConfigError, Overrides};

#[derive(Parser)]
#[command(name = "sinrlab", version, about = "SINR percolation experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output`, else `.`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of replicas.
        #[arg(long)]
        replicas: Option<usize>,
        /// Worker threads (default: all cores); results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List experiment kinds and their fields.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        None | Some(Command::List) => {
            print!("{}", registry_text());
            ExitCode::SUCCESS
        }
        Some(Command::Run {
            config,
            seed,
            out,
            replicas,
            workers,
        }) => {
            if let Some(w) = workers {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
                    eprintln!("error: cannot start worker pool: {e}");
                    return ExitCode::from(1);
                }
            }
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(source) => {
                    let e = ConfigError::Read {
                        path: config.display().to_string(),
                        source,
                    };
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let cfg = match parse(&text, &Overrides { seed, replicas }) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let dir = out
                .or_else(|| cfg.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            match run::run(&cfg, &dir) {
                Ok(outcome) => {
                    println!("{}", outcome.results.display());
                    println!("{}", outcome.plot.display());
                    match outcome.error {
                        None => ExitCode::SUCCESS,
                        Some(e) => {
                            eprintln!("error: {e} (partial results kept)");
                            ExitCode::from(e.exit_code() as u8)
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
