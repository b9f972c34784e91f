use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use syncert::{ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "syncert", version, about = "Synchronization certificates and power-network scenarios")]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Replaces the damping and disturbance seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match cli.command {
        Command::Validate { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
            };
            let diag = cfg.validate(&base_dir(&config));
            if diag.is_empty() {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            } else {
                for d in diag.iter() {
                    eprintln!("{}: {d}", config.display());
                }
                ExitCode::FAILURE
            }
        }
        Command::Run { config, output, seed } => {
            let result = ExperimentConfig::load(&config)
                .map_err(syncert::run::RunError::from)
                .and_then(|cfg| syncert::run(cfg, &base_dir(&config), &RunOptions { output, seed }));
            match result {
                Ok(summary) => {
                    for c in &summary.certificates {
                        let verdict = match (c.passed, &c.error) {
                            (Some(true), _) => "pass".to_string(),
                            (Some(false), _) => "fail".to_string(),
                            (None, Some(e)) => format!("error: {e}"),
                            (None, None) => format!("gamma_r = {:.4}", c.gamma_r.unwrap_or(f64::NAN)),
                        };
                        println!("{:?}: {verdict}", c.kind);
                    }
                    if let Some(t) = &summary.trip {
                        println!("T1 = {:?}, T2 = {:?}, converged = {}", t.t1, t.t2, t.converged);
                    }
                    println!("artifacts in {}", summary.output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
