use std::path::PathBuf;
use std::process::ExitCode;

use amopt::commands::{self, CliError};
use amopt::config::load_config;
use clap::{Args, Parser, Subcommand};

/// Process-parameter optimization for printed walls.
#[derive(Parser)]
#[command(name = "amopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one print simulation and report the shape error.
    Simulate(Common),
    /// Compare df/dh against central differences.
    VerifyGradient(Common),
    /// Run the optimizer configured in the [optimizer] block.
    Optimize(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent simulations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides output.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AMOPT_LOG", "warn")).init();
    let cli = Cli::parse();
    let (Command::Simulate(c) | Command::VerifyGradient(c) | Command::Optimize(c)) = &cli.command;
    let result = load_config(&c.config).map_err(CliError::Config).and_then(|mut cfg| {
        if let Some(s) = c.seed {
            cfg.output.seed = s;
        }
        let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        match &cli.command {
            Command::Simulate(_) => commands::simulate(&cfg, &out).map(|_| ()),
            Command::VerifyGradient(_) => commands::verify_gradient(&cfg, &out).map(|_| ()),
            Command::Optimize(_) => commands::optimize(&cfg, &out, c.jobs).map(|_| ()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
