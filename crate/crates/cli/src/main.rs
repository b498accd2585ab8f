//! `adambs` — experiment runner comparing Adam/AMSGrad under uniform and
//! bandit-learned example sampling.
//!
//! Exit status: 0 success, 1 validation failure, 2 runtime failure.

mod config;
mod experiment;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigUse, ExperimentConfig};

#[derive(Parser)]
#[command(name = "adambs", version, about = "Benchmark harness for Adam with bandit sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config and write metrics CSVs
    Run { config: PathBuf },
    /// Check a JSON config and report every violated invariant
    Validate { config: PathBuf },
    /// Run the scaling probes from the config's probe section
    ProbeScaling { config: PathBuf },
}

enum Failure {
    /// Bad config contents: exit 1.
    Validation(Vec<String>),
    /// I/O or execution trouble: exit 2.
    Runtime(anyhow::Error),
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    match ExperimentConfig::load(path) {
        Err(io) => Err(Failure::Runtime(
            anyhow::Error::new(io).context(format!("reading {}", path.display())),
        )),
        Ok(Err(parse)) => Err(Failure::Validation(vec![format!("config parse: {parse}")])),
        Ok(Ok(config)) => Ok(config),
    }
}

fn validated(path: &Path, usage: ConfigUse) -> Result<ExperimentConfig, Failure> {
    let config = load(path)?;
    let diagnostics = config.validate(usage);
    if diagnostics.is_empty() {
        Ok(config)
    } else {
        Err(Failure::Validation(diagnostics))
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config } => {
            let config = validated(&config, ConfigUse::Run)?;
            experiment::run_experiment(&config).map_err(Failure::Runtime)
        }
        Command::Validate { config } => {
            validated(&config, ConfigUse::Any)?;
            println!("ok");
            Ok(())
        }
        Command::ProbeScaling { config } => {
            let config = validated(&config, ConfigUse::Probe)?;
            let probe = config.probe.clone().expect("validated probe section");
            experiment::run_probes(&config, &probe).map_err(Failure::Runtime)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(diagnostics)) => {
            for line in &diagnostics {
                eprintln!("invalid: {line}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Runtime(error)) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}
