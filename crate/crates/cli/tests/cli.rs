use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ensemble-lab"))
}

fn run(config: &Path, seed: u64, out: &Path) -> Output {
    bin().args(["run", "--config"]).arg(config).args(["--seed", &seed.to_string(), "--out"]).arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const BANDIT: &str = "suite = bandit\n[bandit]\nhorizon = 30\nproblems = 8\ntuning_problems = 4\nlambda_grid = 0.1,1,10\nprior_sample_variance_grid = 0.1,1\n";
const LINREG: &str = "suite = linreg\n[linreg]\nn_datasets = 30\nmc_samples = 2000\ntrain_size = 5\n";
const TESTBED: &str = "suite = testbed\n[testbed]\ntrain_size = 20\nensemble_size = 3\nepochs = 3\nmarginal_queries = 100\nanchor_pairs = 100\n";

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("bandit", BANDIT), ("linreg", LINREG), ("testbed", TESTBED)] {
        let cfg = write(dir.path(), &format!("{name}.txt"), text);
        let (a, b) = (dir.path().join(format!("{name}-a")), dir.path().join(format!("{name}-b")));
        assert!(run(&cfg, 5, &a).status.success());
        assert!(run(&cfg, 5, &b).status.success());
        for file in ["results.csv", "manifest.txt"] {
            assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{name}/{file}");
        }
        let other = dir.path().join(format!("{name}-c"));
        assert!(run(&cfg, 6, &other).status.success());
        assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(other.join("results.csv")).unwrap());
    }
}

#[test]
fn matched_bootstrap_row_is_exactly_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "l.txt", LINREG);
    assert!(run(&cfg, 1, &dir.path().join("out")).status.success());
    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("linreg,ensemble-bp,")).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!((fields[4], fields[5], fields[6]), ("expected_kl", "0", "0"));
}

#[test]
fn bandit_writes_one_trace_per_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.txt", BANDIT);
    let out = dir.path().join("out");
    assert!(run(&cfg, 2, &out).status.success());
    for family in ["ensemble-n", "ensemble-p", "ensemble-bp"] {
        let trace = fs::read_to_string(out.join(format!("regret_{family}.tsv"))).unwrap();
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines.len(), 30, "{family}");
        assert!(lines[0].starts_with("1\t") && lines[29].starts_with("30\t"));
    }
    assert!(!out.join("regret_ensemble-p-weighted.tsv").exists());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=2\n") && manifest.contains("config_hash="));
}

#[test]
fn exit_codes_distinguish_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "k.txt", "suite = bandit\n[bandit]\nhorizon_length = 3\n");
    assert_eq!(run(&bad_key, 0, &dir.path().join("x")).status.code(), Some(2));
    let bad_range = write(dir.path(), "r.txt", "suite = testbed\n[testbed]\ntemperature = -1\n");
    assert_eq!(run(&bad_range, 0, &dir.path().join("x")).status.code(), Some(2));
    assert_eq!(run(&dir.path().join("missing.txt"), 0, &dir.path().join("x")).status.code(), Some(2));
    // The output path is a regular file, so the run directory cannot be created.
    let cfg = write(dir.path(), "l.txt", LINREG);
    let blocker = write(dir.path(), "blocker", "");
    assert_eq!(run(&cfg, 0, &blocker.join("out")).status.code(), Some(3));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
}

#[test]
fn report_aggregates_seeds_and_rejects_bad_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.txt", BANDIT);
    for seed in 0..3 {
        assert!(run(&cfg, seed, &dir.path().join(format!("runs/s{seed}"))).status.success());
    }
    let pattern = format!("{}/runs/*/results.csv", dir.path().display());
    let out = dir.path().join("rep");
    let status = bin().args(["report", "--in", &pattern, "--mode", "per-setting", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.contains(",3,true")));
    let signs = fs::read_to_string(out.join("signtests.csv")).unwrap();
    assert_eq!(signs.lines().count(), 4);
    assert_eq!(fs::read_to_string(out.join("regret_ensemble-p.tsv")).unwrap().lines().count(), 30);

    let bad = dir.path().join("bad");
    fs::create_dir_all(&bad).unwrap();
    write(&bad, "results.csv", "suite,agent,params,setting,metric,value,std_error,seed,extra\n");
    let code = bin().args(["report", "--in"]).arg(bad.join("results.csv")).output().unwrap().status.code();
    assert_eq!(code, Some(2));
    // Same key and seed as runs/s0 but a different value.
    let conflict = dir.path().join("runs/conflict");
    fs::create_dir_all(&conflict).unwrap();
    let original = fs::read_to_string(dir.path().join("runs/s0/results.csv")).unwrap();
    let altered: String = original
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let mut f: Vec<&str> = l.split(',').collect();
            if i > 0 {
                f[5] = "123.5";
            }
            f.join(",") + "\n"
        })
        .collect();
    fs::write(conflict.join("results.csv"), altered).unwrap();
    let glob_all = format!("{}/runs/*/results.csv", dir.path().display());
    let code =
        bin().args(["report", "--in", &glob_all, "--out"]).arg(dir.path().join("rep2")).output().unwrap().status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn sweep_runs_every_cell_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let grid = format!(
        "suite = bandit\n[bandit]\nhorizon = 10\nproblems = 4\ntune = false\nlambda = 0.5 | 2\n[sweep]\nseeds = 0..2\nout = {}\nmode = global\n",
        out.display()
    );
    let grid = write(dir.path(), "grid.txt", &grid);
    let status = bin().args(["sweep", "--grid"]).arg(&grid).args(["--jobs", "2"]).status().unwrap();
    assert!(status.success());
    for cell in 0..2 {
        for seed in 0..2 {
            assert!(out.join(format!("cell-{cell:04}/seed-{seed}/results.csv")).exists());
        }
        let cfg = out.join(format!("cell-{cell:04}/config.txt"));
        let direct = dir.path().join(format!("direct-{cell}"));
        assert!(run(&cfg, 1, &direct).status.success());
        assert_eq!(
            fs::read(direct.join("results.csv")).unwrap(),
            fs::read(out.join(format!("cell-{cell:04}/seed-1/results.csv"))).unwrap()
        );
    }
    let summary = fs::read_to_string(out.join("report/summary.csv")).unwrap();
    // Global mode keeps one lambda per agent.
    let selected: Vec<&str> = summary.lines().filter(|l| l.ends_with(",true")).collect();
    assert_eq!(selected.len(), 3);
    let cells = fs::read_to_string(out.join("cells.tsv")).unwrap();
    assert!(cells.contains("0000\tbandit.lambda=0.5") && cells.contains("0001\tbandit.lambda=2"));
}
