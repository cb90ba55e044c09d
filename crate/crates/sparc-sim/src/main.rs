//! Batch simulation CLI for sparse regression codes.

use clap::{Args, Parser, Subcommand};
use sparc_sim::{run_experiment, ExperimentConfig, Scenario, SimError};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sparc-sim",
    about = "Monte-Carlo simulations of sparse regression codes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key = value configuration file.
    #[arg(long)]
    config: Option<String>,
    /// Master seed; every trial derives its own stream from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Point-to-point AWGN channel trials with AMP decoding.
    SimulateChannel(Common),
    /// Spatially coupled SPARC trials with SC-AMP decoding.
    SimulateSc(Common),
    /// Two-user Gaussian broadcast channel.
    SimulateBc(Common),
    /// Two-user Gaussian multiple-access channel.
    SimulateMac(Common),
    /// Successive-cancellation lossy compression.
    Compress(Common),
    /// State-evolution trajectory.
    Se(Common),
    /// Power allocation dump.
    Alloc(Common),
    /// Wyner-Ziv toy pipeline (exhaustive search; tiny codes only).
    WzDemo(Common),
    /// Gelfand-Pinsker toy pipeline (exhaustive search; tiny codes only).
    GpDemo(Common),
}

impl Command {
    fn scenario(&self) -> Scenario {
        match self {
            Command::SimulateChannel(_) => Scenario::Channel,
            Command::SimulateSc(_) => Scenario::ScChannel,
            Command::SimulateBc(_) => Scenario::Broadcast,
            Command::SimulateMac(_) => Scenario::Mac,
            Command::Compress(_) => Scenario::Compress,
            Command::Se(_) => Scenario::Se,
            Command::Alloc(_) => Scenario::Alloc,
            Command::WzDemo(_) => Scenario::Wz,
            Command::GpDemo(_) => Scenario::Gp,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::SimulateChannel(c)
            | Command::SimulateSc(c)
            | Command::SimulateBc(c)
            | Command::SimulateMac(c)
            | Command::Compress(c)
            | Command::Se(c)
            | Command::Alloc(c)
            | Command::WzDemo(c)
            | Command::GpDemo(c) => c,
        }
    }
}

fn build_config(scenario: Scenario, common: &Common) -> Result<ExperimentConfig, SimError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("config file {path:?}: {e}")))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(scenario, &text).map_err(SimError::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(command: &Command) -> Result<(), SimError> {
    let cfg = build_config(command.scenario(), command.common())?;
    // Render fully before touching the output so failures leave no file.
    let mut buffer = Vec::new();
    run_experiment(&cfg, &mut buffer)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &buffer)?,
        None => std::io::stdout().write_all(&buffer)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
