use std::path::PathBuf;
use std::process::ExitCode;

use cbo_cli::presets::{self, FigTrajectoriesOptions, FigVarianceOptions};
use cbo_cli::{report, run, CliError, RunConfig};
use clap::{Parser, Subcommand};

/// Consensus-based optimization runner.
#[derive(Parser)]
#[command(name = "cbo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a JSON config (or the preset it names).
    Run { config: PathBuf },
    /// Print closed-form theory quantities for a config.
    Theory { config: PathBuf },
    /// Run an experiment preset.
    #[command(subcommand)]
    Preset(PresetCommand),
}

#[derive(Subcommand)]
enum PresetCommand {
    /// 1-D Rastrigin, N(mu, 0.8) for mu = 1..4: V and Var over time.
    FigVariance {
        /// Fraction of the full 320000 particles.
        #[arg(long, default_value_t = 1.0 / 16.0)]
        scale: f64,
        /// Use all 320000 particles.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out/fig-variance")]
        out: PathBuf,
    },
    /// 2-D Rastrigin with three tracked agents, averaged over runs.
    FigTrajectories {
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Use 32000 sampled agents per run instead of 4000.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 700)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out/fig-trajectories")]
        out: PathBuf,
    },
    /// Mean-field approximation error against N.
    MfaSweep { config: PathBuf },
    /// Check the quantitative Laplace bound on random empirical measures.
    LaplaceAudit { config: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CBO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("CBO_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => run::run_path(&config),
        Command::Theory { config } => {
            print!("{}", report::theory_report(&RunConfig::load(&config)?)?.render());
            Ok(())
        }
        Command::Preset(p) => match p {
            PresetCommand::FigVariance {
                scale,
                full,
                steps,
                seed,
                out,
            } => {
                let opts = FigVarianceOptions {
                    scale: if full { 1.0 } else { scale },
                    steps,
                    seed,
                    ..Default::default()
                };
                presets::write_fig_variance(&out, &opts)?;
                print!(
                    "{}",
                    std::fs::read_to_string(out.join("summary.txt")).unwrap_or_default()
                );
                Ok(())
            }
            PresetCommand::FigTrajectories {
                runs,
                full,
                steps,
                seed,
                out,
            } => {
                let base = if full {
                    FigTrajectoriesOptions::full()
                } else {
                    FigTrajectoriesOptions::default()
                };
                let opts = FigTrajectoriesOptions {
                    runs,
                    steps,
                    seed,
                    ..base
                };
                presets::write_fig_trajectories(&out, &opts)?;
                print!(
                    "{}",
                    std::fs::read_to_string(out.join("summary.txt")).unwrap_or_default()
                );
                Ok(())
            }
            PresetCommand::MfaSweep { config } => {
                let cfg = RunConfig::load(&config)?;
                presets::write_mfa_sweep(&cfg)?;
                print!(
                    "{}",
                    std::fs::read_to_string(cfg.outputs.join("summary.txt")).unwrap_or_default()
                );
                Ok(())
            }
            PresetCommand::LaplaceAudit { config } => {
                let cfg = RunConfig::load(&config)?;
                let res = presets::write_laplace_audit(&cfg);
                print!(
                    "{}",
                    std::fs::read_to_string(cfg.outputs.join("summary.txt")).unwrap_or_default()
                );
                res.map(|_| ())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cbo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
