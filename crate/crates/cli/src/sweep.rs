//! The `sweep` subcommand: Cartesian-product grid over configuration values.
//!
//! A grid file is an ordinary configuration in which any value may list
//! alternatives separated by `|`, plus a `[sweep]` section:
//!
//! ```text
//! suite = bandit
//! [bandit]
//! n_actions = 4 | 8
//! [sweep]
//! seeds = 0..10
//! out = sweep-bandit
//! mode = per-setting
//! ```
//!
//! Every cell gets `<out>/cell-NNNN/config.txt` and one run directory per
//! seed, `<out>/cell-NNNN/seed-S/`. With `mode` set, a report over all cells
//! is written to `<out>/report/`.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use crate::config::{RawConfig, Section};
use crate::error::{CliError, CliResult};
use crate::experiment::ExperimentConfig;
use crate::report::{self, Mode};
use crate::results::{write_file, RESULTS_FILE};
use crate::run;

pub const SWEEP_SECTION: &str = "sweep";

#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    /// Values chosen for the varied keys, as `section.key=value`.
    pub assignment: Vec<String>,
    pub text: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub cells: Vec<Cell>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub mode: Option<Mode>,
}

pub fn parse_mode(s: &str) -> CliResult<Mode> {
    match s {
        "per-setting" => Ok(Mode::PerSetting),
        "global" => Ok(Mode::Global),
        other => Err(CliError::config(format!("mode must be per-setting or global, not '{other}'"))),
    }
}

fn parse_seeds(raw: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::config(format!("[sweep] seeds: cannot parse '{raw}'"));
    let seeds: Vec<u64> = match raw.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?);
            (a..b).collect()
        }
        None => raw.split(',').map(|s| s.trim().parse::<u64>().map_err(|_| bad())).collect::<CliResult<_>>()?,
    };
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if seeds.is_empty() || unique.len() != seeds.len() {
        return Err(CliError::config("[sweep] seeds must be a nonempty list without repeats"));
    }
    Ok(seeds)
}

impl Sweep {
    pub fn parse(text: &str, out_override: Option<&Path>) -> CliResult<Self> {
        let raw = RawConfig::parse(text)?;
        let mut sweep = Section::new(SWEEP_SECTION, raw.section(SWEEP_SECTION).unwrap_or(&[]));
        let seeds = parse_seeds(&sweep.parse_or::<String>("seeds", "0".into())?)?;
        let out = PathBuf::from(sweep.parse_or::<String>("out", "sweep-out".into())?);
        let mode_raw = sweep.parse_or::<String>("mode", "none".into())?;
        sweep.finish()?;
        let mode = if mode_raw == "none" { None } else { Some(parse_mode(&mode_raw)?) };

        let base: Vec<(String, Vec<(String, String)>)> =
            raw.sections.into_iter().filter(|(name, _)| name != SWEEP_SECTION).collect();
        let mut axes: Vec<(usize, usize, Vec<String>)> = Vec::new();
        for (si, (_, entries)) in base.iter().enumerate() {
            for (ei, (_, value)) in entries.iter().enumerate() {
                if value.contains('|') {
                    let alts: Vec<String> = value.split('|').map(|v| v.trim().to_string()).collect();
                    if alts.iter().any(String::is_empty) {
                        return Err(CliError::config(format!("empty alternative in '{value}'")));
                    }
                    axes.push((si, ei, alts));
                }
            }
        }
        let total: usize = axes.iter().map(|(_, _, a)| a.len()).product();
        if total > 100_000 {
            return Err(CliError::config(format!("grid has {total} cells; at most 100000 allowed")));
        }
        let mut cells = Vec::with_capacity(total);
        for index in 0..total {
            let mut sections = base.clone();
            let mut assignment = Vec::new();
            let mut rest = index;
            for (si, ei, alts) in axes.iter().rev() {
                let choice = &alts[rest % alts.len()];
                rest /= alts.len();
                let (name, entries) = &mut sections[*si];
                entries[*ei].1 = choice.clone();
                let prefix = if name.is_empty() { String::new() } else { format!("{name}.") };
                assignment.push(format!("{prefix}{}={choice}", entries[*ei].0));
            }
            assignment.reverse();
            let text = RawConfig { sections }.render();
            let config = ExperimentConfig::parse(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("cell {index} ({}): {msg}", assignment.join(";"))),
                other => other,
            })?;
            cells.push(Cell { index, assignment, text, config });
        }
        let out = out_override.map(Path::to_path_buf).unwrap_or(out);
        Ok(Sweep { cells, seeds, out, mode })
    }

    pub fn cell_dir(&self, cell: usize) -> PathBuf {
        self.out.join(format!("cell-{cell:04}"))
    }

    pub fn run_dir(&self, cell: usize, seed: u64) -> PathBuf {
        self.cell_dir(cell).join(format!("seed-{seed}"))
    }

    /// Runs every (cell, seed) pair on `jobs` worker threads. Each task writes
    /// only inside its own run directory.
    pub fn execute(&self, jobs: usize) -> CliResult<()> {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let mut index = String::from("cell\tassignment\n");
        for cell in &self.cells {
            let dir = self.cell_dir(cell.index);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            write_file(&dir.join("config.txt"), &cell.text)?;
            index.push_str(&format!("{:04}\t{}\n", cell.index, cell.assignment.join(";")));
        }
        write_file(&self.out.join("cells.tsv"), &index)?;

        let tasks: Vec<(usize, u64)> =
            self.cells.iter().flat_map(|c| self.seeds.iter().map(move |&s| (c.index, s))).collect();
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        thread::scope(|scope| {
            for _ in 0..jobs.min(tasks.len()) {
                let tx = tx.clone();
                let (next, tasks) = (&next, &tasks);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(cell, seed)) = tasks.get(i) else { break };
                    let result = run::execute(&self.cells[cell].config, seed, &self.run_dir(cell, seed));
                    if let Err(e) = result {
                        let _ = tx.send((i, e));
                    }
                });
            }
        });
        drop(tx);
        if let Some((_, e)) = rx.into_iter().min_by_key(|(i, _)| *i) {
            return Err(e);
        }
        if let Some(mode) = self.mode {
            let paths: Vec<PathBuf> = tasks.iter().map(|&(c, s)| self.run_dir(c, s).join(RESULTS_FILE)).collect();
            report::build(&report::load(&paths)?, mode)?.write(&self.out.join("report"))?;
        }
        Ok(())
    }
}
