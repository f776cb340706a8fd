use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resetctl_cli::commands::{cmd_compare, cmd_hosidf, cmd_sensitivity, cmd_step, Report};
use resetctl_cli::config::{GridTarget, Overrides, RunConfig};
use resetctl_cli::CliResult;

/// Analysis and simulation of reset control loops built around a CgLp element.
#[derive(Parser)]
#[command(name = "resetctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop higher-order sinusoidal input describing functions.
    Hosidf(Common),
    /// Simulated pseudo-sensitivity sweep.
    Sensitivity(Common),
    /// Unit-step responses and metrics.
    Step(Common),
    /// Sequences compared at the tabulated reference points.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; built-in defaults are used without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequences to run, e.g. `1,3`.
    #[arg(long = "sequence", value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=4))]
    sequences: Option<Vec<u8>>,
    /// Measurement noise, percent of the reference amplitude.
    #[arg(long)]
    noise_pct: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Enable the shaping filter on the reset trigger.
    #[arg(long, overrides_with = "no_shaping")]
    shaping: bool,
    #[arg(long, overrides_with = "shaping")]
    no_shaping: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lowest frequency of the sweep, Hz.
    #[arg(long)]
    fmin: Option<f64>,
    /// Highest frequency of the sweep, Hz.
    #[arg(long)]
    fmax: Option<f64>,
    /// Number of sweep points.
    #[arg(long)]
    points: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            sequences: self.sequences.clone(),
            noise_pct: self.noise_pct,
            seed: self.seed,
            shaping: match (self.shaping, self.no_shaping) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
            out: self.out.clone(),
            fmin_hz: self.fmin,
            fmax_hz: self.fmax,
            points: self.points,
        }
    }

    fn load(&self, grid: GridTarget) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::parse("")?,
        };
        cfg.apply(&self.overrides(), grid)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<Report> {
    match cli.command {
        Command::Hosidf(c) => cmd_hosidf(&c.load(GridTarget::Hosidf)?),
        Command::Sensitivity(c) => cmd_sensitivity(&c.load(GridTarget::Sim)?),
        Command::Step(c) => cmd_step(&c.load(GridTarget::Sim)?),
        Command::Compare(c) => cmd_compare(&c.load(GridTarget::Sim)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
