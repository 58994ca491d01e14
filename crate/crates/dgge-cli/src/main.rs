//! `dgge`: late-time magnetization of the Trotterized XXZ chain from the
//! string description, exact diagonalization, or the free-fermion lines.

mod commands;
mod config;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EdMode, FreeMode, Outcome};
use config::Knobs;
use reproduce::Figure;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] trotter_dgge::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("threads: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
    #[error("{0} point(s) failed to converge")]
    Partial(usize),
}

impl CliError {
    pub fn is_numerical(&self) -> bool {
        match self {
            CliError::Model(e) => e.is_numerical(),
            CliError::Partial(_) => true,
            _ => false,
        }
    }

    fn exit_code(&self) -> ExitCode {
        if self.is_numerical() {
            ExitCode::from(2)
        } else {
            ExitCode::from(1)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dgge", version, about = "Late-time ensembles of the Trotterized XXZ chain after a Néel quench")]
struct Cli {
    /// JSON file with knob values; command-line flags take precedence
    #[arg(long, global = true, env = "DGGE_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    knobs: Knobs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// γ, x, regime and threshold for (Δ, τ)
    Params,
    /// Root densities and η functions on the rapidity grid
    Dgge,
    /// T-system and Y-system residuals at a few probe points
    YsystemCheck,
    /// Late-time staggered magnetization at one point
    Stagmag,
    /// Staggered magnetization over a τ sweep at fixed Δ
    StagmagSweep,
    /// Exact diagonalization of a short chain
    Ed {
        #[arg(long, value_enum)]
        mode: EdMode,
    },
    /// Closed-form dynamics on the Gaussian lines
    Free {
        #[arg(long, value_enum)]
        mode: FreeMode,
    },
    /// Datasets behind the figures
    Reproduce {
        #[arg(long, value_enum)]
        figure: Figure,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let knobs = match &cli.config {
        Some(path) => cli.knobs.over(Knobs::load(path)?),
        None => cli.knobs,
    };
    if let Some(n) = knobs.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out: Outcome = match cli.command {
        Command::Params => commands::params(&knobs)?.into(),
        Command::Dgge => commands::dgge(&knobs)?.into(),
        Command::YsystemCheck => commands::ysystem_check(&knobs)?,
        Command::Stagmag => commands::stagmag(&knobs)?.into(),
        Command::StagmagSweep => commands::stagmag_sweep(&knobs)?,
        Command::Ed { mode } => commands::ed(&knobs, mode)?.into(),
        Command::Free { mode } => commands::free(&knobs, mode)?.into(),
        Command::Reproduce { figure } => {
            let dir = knobs.output.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let out = reproduce::run(figure, &knobs)?;
            let ext = match knobs.format {
                Some(config::Format::Json) => "json",
                _ => "csv",
            };
            let path = dir.join(format!("{}.{ext}", figure.name()));
            out.report.write_to(Some(&path), knobs.format)?;
            eprintln!("wrote {}", path.display());
            return finish(out.failures);
        }
    };
    out.report.write_to(knobs.output.as_deref(), knobs.format)?;
    finish(out.failures)
}

fn finish(failures: usize) -> Result<(), CliError> {
    if failures > 0 {
        Err(CliError::Partial(failures))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
