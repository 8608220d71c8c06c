//! `ensemble-lab`: run experiments, aggregate results and sweep grids.

mod config;
mod error;
mod experiment;
mod report;
mod results;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::report::Mode;

#[derive(Debug, Parser)]
#[command(name = "ensemble-lab", version, about = "Ensemble posterior-approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    PerSetting,
    Global,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::PerSetting => Mode::PerSetting,
            ModeArg::Global => Mode::Global,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one suite configuration under one seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate results.csv files across seeds.
    Report {
        /// Glob over results.csv files or run directories.
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum, default_value = "per-setting")]
        mode: ModeArg,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Run every cell of a configuration grid.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the grid's `[sweep] out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, seed, out } => run::execute(&run::load_config(&config)?, seed, &out),
        Command::Report { input, mode, out } => {
            let inputs = report::load(&report::collect_inputs(&input)?)?;
            let built = report::build(&inputs, mode.into())?;
            built.write(&out)?;
            print!("{}", built.summary_csv());
            Ok(())
        }
        Command::Sweep { grid, jobs, out } => {
            let text = std::fs::read_to_string(&grid)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", grid.display())))?;
            sweep::Sweep::parse(&text, out.as_deref())?.execute(jobs)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ensemble-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
