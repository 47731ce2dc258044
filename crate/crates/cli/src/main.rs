use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ofvi_cli::{
    cmd_collect, cmd_evaluate, cmd_full, cmd_learn, cmd_oracle, CliError, ExperimentConfig,
};

/// Learn an output-feedback LQR controller from input-output data.
#[derive(Parser)]
#[command(name = "ofvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the probing experiment; write trajectory and regression CSVs.
    Collect(Common),
    /// Run value iteration on the regression CSV; write gains and history.
    Learn(Common),
    /// Simulate the learned controller against optimal state feedback.
    Evaluate(Common),
    /// Collect, learn and evaluate; write report.json.
    Full(Common),
    /// Write the model-based realization and Riccati solutions.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probing seed (overrides `probing_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Track errors against the model-based solution while learning.
    #[arg(long)]
    attach_oracle: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.probing_seed = seed;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Collect(c) => cmd_collect(&c.load()?).map(drop),
        Command::Learn(c) => cmd_learn(&c.load()?, c.attach_oracle).map(drop),
        Command::Evaluate(c) => cmd_evaluate(&c.load()?).map(drop),
        Command::Full(c) => cmd_full(&c.load()?, c.attach_oracle).map(drop),
        Command::Oracle(c) => cmd_oracle(&c.load()?).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
