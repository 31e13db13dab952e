use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use emal::experiment::{ExperimentConfig, DATA_DIR_ENV};
use emal_service::{router, AppState};

/// Serve labeling sessions over HTTP.
#[derive(Debug, Parser)]
#[command(name = "emal-serve", version)]
struct Args {
    /// Experiment configs whose datasets to load; each is served under the config's name.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session checkpoints; existing ones are restored at start.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let mut datasets = HashMap::new();
    for path in &args.configs {
        let config = match ExperimentConfig::load(path, args.data_dir.as_deref()) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        match config.dataset.load() {
            Ok(task) => {
                eprintln!("loaded {} ({} pairs)", config.name, task.len());
                datasets.insert(config.name, Arc::new(task));
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
    }
    if let Some(dir) = &args.checkpoints {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    let state = Arc::new(AppState::new(datasets, args.checkpoints));
    match state.restore() {
        Ok(0) => {}
        Ok(n) => eprintln!("restored {n} sessions"),
        Err(e) => {
            eprintln!("error: restoring checkpoints: {e:?}");
            return ExitCode::from(2);
        }
    }
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: bind {}: {e}", args.addr);
            return ExitCode::from(2);
        }
    };
    eprintln!("listening on http://{}", args.addr);
    if let Err(e) = axum::serve(listener, router(state)).await {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
