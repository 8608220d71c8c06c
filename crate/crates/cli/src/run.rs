//! The `run` subcommand: one configuration, one seed, one output directory.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::experiment::ExperimentConfig;
use crate::results::{render_csv, write_file, MANIFEST_FILE, RESULTS_FILE};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(config: &ExperimentConfig, seed: u64, results: &str) -> String {
    let mut out = format!(
        "suite={}\nseed={seed}\nconfig_hash={}\ncode_version={CODE_VERSION}\nresults_sha256={}\n",
        config.suite_name(),
        config.hash(),
        hex(&Sha256::digest(results.as_bytes())),
    );
    for (section, entries) in &config.canonical.sections {
        for (k, v) in entries {
            if section.is_empty() {
                out.push_str(&format!("config.{k}={v}\n"));
            } else {
                out.push_str(&format!("config.{section}.{k}={v}\n"));
            }
        }
    }
    out
}

/// Runs `config` under `seed` and writes every output file into `out`.
pub fn execute(config: &ExperimentConfig, seed: u64, out: &Path) -> CliResult<()> {
    let output = config.run(seed)?;
    let results = render_csv(&output.rows)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, contents) in &output.text_files {
        write_file(&out.join(name), contents)?;
    }
    for (name, bytes) in &output.binary_files {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    write_file(&out.join(RESULTS_FILE), &results)?;
    write_file(&out.join(MANIFEST_FILE), &manifest(config, seed, &results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hash_seed_and_resolved_keys() {
        let cfg = ExperimentConfig::parse("suite = bandit\n[bandit]\nhorizon = 7").unwrap();
        let m = manifest(&cfg, 42, "x");
        assert!(m.starts_with("suite=bandit\nseed=42\n"));
        assert!(m.contains(&format!("config_hash={}\n", cfg.hash())));
        assert!(m.contains("config.bandit.horizon=7\n"));
        assert!(m.contains("config.bandit.n_actions=4\n"));
        assert!(m.lines().all(|l| l.contains('=')));
    }
}
