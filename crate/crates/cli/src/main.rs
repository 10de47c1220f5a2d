//! `distill`: batch runner for distillation experiments.
//!
//! Exit codes: 0 success, 1 computation failure, 2 configuration error,
//! 3 atom budget exceeded.

mod config;
mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use distill_core::DistillError;

#[derive(Parser)]
#[command(name = "distill", version, about = "Exact and second-order thermodynamic distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file; defaults to the config's output.path, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        atom_budget: Option<usize>,
        /// Report logarithmic and energy columns in bits.
        #[arg(long)]
        bits: bool,
    },
    /// Check a config file and print it in normalized form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_OVERFLOW: u8 = 3;

fn config_failure(path: &Path, err: &config::ConfigError) -> ExitCode {
    eprintln!("error: {}: {err}", path.display());
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config: path } => {
            let cfg = match config::load(&path) {
                Ok(c) => c,
                Err(e) => return config_failure(&path, &e),
            };
            if let Err(e) = cfg.ensemble() {
                return config_failure(&path, &e);
            }
            println!("OK");
            print!("{}", cfg.normalized());
            ExitCode::SUCCESS
        }
        Command::Run {
            config: path,
            out,
            seed,
            threads,
            atom_budget,
            bits,
        } => {
            let cfg = match config::load(&path) {
                Ok(c) => c,
                Err(e) => return config_failure(&path, &e),
            };
            let ensemble = match cfg.ensemble() {
                Ok(e) => e,
                Err(e) => return config_failure(&path, &e),
            };
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot set thread count: {e}");
                    return ExitCode::from(EXIT_FAILURE);
                }
            }
            let settings = tasks::RunSettings { seed, atom_budget };
            let table = match tasks::run(&cfg, &ensemble, &settings) {
                Ok(t) => t,
                Err(e @ DistillError::AtomBudget { .. }) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_OVERFLOW);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAILURE);
                }
            };
            let csv = table.to_csv(cfg.task.as_str(), bits || cfg.output.bits);
            let target = out.or_else(|| cfg.output.path.as_ref().map(|p| resolve(&path, p)));
            match target {
                Some(file) => {
                    if let Err(e) = std::fs::write(&file, csv) {
                        eprintln!("error: cannot write {}: {e}", file.display());
                        return ExitCode::from(EXIT_FAILURE);
                    }
                }
                None => print!("{csv}"),
            }
            ExitCode::SUCCESS
        }
    }
}

/// Relative output paths in a config are taken relative to the config file.
fn resolve(config_path: &Path, output: &str) -> PathBuf {
    let p = Path::new(output);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}
