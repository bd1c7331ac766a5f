//! Command-line harness: capacity queries, experiment sweeps and the
//! verification suite.
//!
//! Exit codes: 0 success, 2 config error, 3 invariant/verification failure,
//! 4 solver failure.

mod capacity;
mod config;
mod sweep;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::{BuiltConfig, ExperimentConfig, ThetaGrid};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use xorcast::lp::SolverError;
use xorcast::sim::SimError;

#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Io(std::io::Error),
    Sim(SimError),
    Solver(SolverError),
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) | CmdError::Io(_) => 2,
            CmdError::Sim(_) => 3,
            CmdError::Solver(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CmdError::Config(m) => format!("config error: {m}"),
            CmdError::Io(e) => format!("io error: {e}"),
            CmdError::Sim(e) => format!("simulation error: {e}"),
            CmdError::Solver(e) => format!("solver error: {e}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "xorcast",
    about = "Two-flow downlink coding: simulator and capacity toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print theta* per scheme and direction.
    Capacity {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run trials x thetas x schemes and write backlog curves.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Worker threads for parallel trials (0 = one per core).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        /// Restrict to these schemes (repeatable).
        #[arg(long)]
        scheme: Vec<String>,
        /// Theta grid as start:stop:step.
        #[arg(long)]
        theta_grid: Option<String>,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        /// Corrupt one artifact to demonstrate check sensitivity
        /// (reactive-table | bout-matrix).
        #[arg(long)]
        inject_fault: Option<String>,
    },
}

fn load_config(path: &PathBuf) -> Result<BuiltConfig, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
        .map_err(CmdError::Config)?
        .build()
        .map_err(CmdError::Config)
}

fn write_out(common: &CommonOpts, cfg: &BuiltConfig, text: &str) -> Result<(), CmdError> {
    let target = common
        .out
        .clone()
        .or_else(|| cfg.raw.output.as_ref().map(PathBuf::from));
    match target {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<ThetaGrid, CmdError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CmdError::Config(format!(
            "--theta-grid expects start:stop:step, got `{s}`"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| CmdError::Config(format!("--theta-grid: {e}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(ThetaGrid::Range {
        start: nums[0],
        stop: nums[1],
        step: nums[2],
    })
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch() -> Result<ExitCode, CmdError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Capacity { common } => {
            let cfg = load_config(&common.config)?;
            let text = capacity::cmd_capacity(&cfg)?;
            write_out(&common, &cfg, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            common,
            seed,
            trials,
            parallel,
            scheme,
            theta_grid,
        } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(seed) = seed {
                cfg.raw.base_seed = seed;
            }
            if let Some(trials) = trials {
                if trials == 0 {
                    return Err(CmdError::Config("--trials must be at least 1".into()));
                }
                cfg.raw.trials = trials;
            }
            if !scheme.is_empty() {
                cfg.raw.schemes = scheme;
            }
            if let Some(grid) = theta_grid {
                cfg.raw.theta_grid = Some(parse_grid(&grid)?);
            }
            let target = common
                .out
                .clone()
                .or_else(|| cfg.raw.output.as_ref().map(PathBuf::from));
            match target {
                Some(path) => {
                    let mut file = fs::File::create(path)?;
                    sweep::cmd_sweep(&cfg, &mut file, parallel)?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    sweep::cmd_sweep(&cfg, &mut lock, parallel)?;
                    lock.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { inject_fault } => {
            let fault = match inject_fault {
                None => None,
                Some(name) => Some(
                    verify::Fault::parse(&name)
                        .ok_or_else(|| CmdError::Config(format!("unknown fault `{name}`")))?,
                ),
            };
            let (table, all_pass) = verify::cmd_verify(fault)?;
            print!("{table}");
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
    }
}
