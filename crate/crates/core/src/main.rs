use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use limitfrac::cli::config::Config;
use limitfrac::cli::{execute, output_dir, summarize, CliError};
use limitfrac::error::ConfigError;

#[derive(Parser)]
#[command(name = "limitfrac", version, about = "Anti-plane phase-field fracture in strain-limiting solids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run { config: PathBuf },
    /// Run a preset (ex1, ex2, ex3, ex4) with optional overrides.
    Example {
        id: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long, default_value_t = 6)]
        cycles: usize,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
    },
}

fn resolve(command: Command) -> Result<Config, CliError> {
    Ok(match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| ConfigError::Io(format!("{}: {e}", config.display())))?;
            Config::parse(&text)?
        }
        Command::Example { id, set } => Config::parse_with_overrides(&format!("run.example = {id}\n"), &set)?,
        Command::Mms { cycles, beta, alpha, mu } => Config::parse_with_overrides(
            "run.example = ex1\n",
            &[
                format!("run.cycles = {cycles}"),
                format!("model.beta = {beta}"),
                format!("model.alpha = {alpha}"),
                format!("model.mu = {mu}"),
            ],
        )?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|cfg| {
        let dir = output_dir(&cfg);
        let report = execute(&cfg, &dir)?;
        for line in summarize(&report) {
            println!("{line}");
        }
        println!("output written to {}", dir.display());
        match report.failure() {
            Some((label, e)) => {
                eprintln!("case {label} stopped early; partial results were written");
                Err(CliError::Solve(e.clone()))
            }
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
