use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emal::experiment::{self, ExperimentConfig, RunOptions, DATA_DIR_ENV};

const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;

/// Run entity-matching active-learning experiments and build report series.
#[derive(Debug, Parser)]
#[command(name = "emal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every session of an experiment config.
    Run {
        config: PathBuf,
        /// Master seed for every session, replacing the configured ones.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, replacing the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory relative dataset paths resolve against.
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
    },
    /// Write F1 and timing series for a finished run directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            jobs,
            out,
            data_dir,
        } => {
            if jobs == Some(0) {
                eprintln!("error: --jobs must be at least 1");
                return ExitCode::from(VALIDATION);
            }
            let config = match ExperimentConfig::load(&config, data_dir.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(VALIDATION);
                }
            };
            let opts = RunOptions { seed, jobs, out };
            match experiment::run_experiment(&config, &opts) {
                Ok(outcome) => {
                    for row in &outcome.summary {
                        println!(
                            "{}\tbest F1 {:.3} ({} labels)\tconverged at {} labels",
                            row.session, row.best_f1, row.labels_at_best, row.labels_to_convergence
                        );
                    }
                    println!("wrote {}", outcome.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(RUNTIME)
                }
            }
        }
        Command::Report { dir } => match experiment::report(&dir) {
            Ok(report) => {
                print!("{}", report.table());
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(RUNTIME)
            }
        },
    }
}
