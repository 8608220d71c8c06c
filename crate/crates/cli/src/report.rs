//! The `report` subcommand: aggregate `results.csv` files across seeds,
//! pick hyperparameters, run paired sign tests and emit plot data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ensemble_lab::stats::{mean_and_std_error, paired_sign_test};

use crate::error::{CliError, CliResult};
use crate::results::{parse_csv, read_file, render_tsv, write_file, ResultRow, RESULTS_FILE};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SIGN_TEST_FILE: &str = "signtests.csv";
pub const SUMMARY_HEADER: &str = "suite,setting,agent,params,metric,mean,std_error,n_seeds,selected";
pub const SIGN_TEST_HEADER: &str =
    "suite,setting,metric,agent_a,params_a,agent_b,params_b,n_pairs,a_lower,b_lower,ties,p_a_lower,p_b_lower,p_two_sided";

/// How hyperparameters are chosen before agents are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Best `params` for every setting separately.
    PerSetting,
    /// One `params` per agent, best on average over all settings.
    Global,
}

/// Metric that drives hyperparameter selection for a suite.
pub fn selection_metric(suite: &str) -> Option<&'static str> {
    match suite {
        "linreg" => Some("expected_kl"),
        "testbed" => Some("joint_kl"),
        "bandit" => Some("final_regret"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub suite: String,
    pub setting: String,
    pub agent: String,
    pub params: String,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Values keyed by seed.
    pub values: BTreeMap<u64, f64>,
    /// Directory of the run that produced each seed's row.
    pub sources: BTreeMap<u64, PathBuf>,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignTestRow {
    pub suite: String,
    pub setting: String,
    pub metric: String,
    pub a: (String, String),
    pub b: (String, String),
    pub n_pairs: usize,
    pub a_lower: usize,
    pub b_lower: usize,
    pub ties: usize,
    pub p_a_lower: f64,
    pub p_b_lower: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub groups: BTreeMap<GroupKey, Group>,
    /// `(suite, setting, agent, params)` tuples chosen by the mode.
    pub selected: BTreeSet<(String, String, String, String)>,
    pub sign_tests: Vec<SignTestRow>,
}

/// Expands `pattern`; a matching directory stands for its `results.csv`.
pub fn collect_inputs(pattern: &str) -> CliResult<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| CliError::config(format!("bad glob '{pattern}': {e}")))?;
    let mut out = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| CliError::Failed(e.to_string()))?;
        out.push(if path.is_dir() { path.join(RESULTS_FILE) } else { path });
    }
    if out.is_empty() {
        return Err(CliError::config(format!("no input matches '{pattern}'")));
    }
    Ok(out)
}

pub fn load(paths: &[PathBuf]) -> CliResult<Vec<(PathBuf, Vec<ResultRow>)>> {
    paths.iter().map(|p| Ok((p.clone(), parse_csv(p, &read_file(p)?)?))).collect()
}

fn key_of(row: &ResultRow) -> GroupKey {
    GroupKey {
        suite: row.suite.clone(),
        setting: row.setting.clone(),
        agent: row.agent.clone(),
        params: row.params.clone(),
        metric: row.metric.clone(),
    }
}

fn by_mean(a: &(String, f64), b: &(String, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0))
}

pub fn build(inputs: &[(PathBuf, Vec<ResultRow>)], mode: Mode) -> CliResult<Report> {
    let mut raw: BTreeMap<GroupKey, (BTreeMap<u64, f64>, BTreeMap<u64, PathBuf>)> = BTreeMap::new();
    for (path, rows) in inputs {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for row in rows {
            // Agents that ignore a swept knob produce identical rows in every
            // cell; those merge. Conflicting values for one key do not.
            let entry = raw.entry(key_of(row)).or_default();
            match entry.0.insert(row.seed, row.value) {
                Some(old) if old.to_bits() != row.value.to_bits() => {
                    return Err(CliError::Schema {
                        path: path.clone(),
                        message: format!("conflicting rows {:?} for seed {}", key_of(row), row.seed),
                    });
                }
                Some(_) => {}
                None => {
                    entry.1.insert(row.seed, dir.clone());
                }
            }
        }
    }
    let groups: BTreeMap<GroupKey, Group> = raw
        .into_iter()
        .map(|(k, (values, sources))| {
            let xs: Vec<f64> = values.values().copied().collect();
            let (mean, se) = mean_and_std_error(&xs);
            let std_error = if mean.is_finite() { se } else { 0.0 };
            (k, Group { values, sources, mean, std_error })
        })
        .collect();
    let selected = select(&groups, mode);
    let sign_tests = sign_tests(&groups, &selected);
    Ok(Report { groups, selected, sign_tests })
}

fn select(groups: &BTreeMap<GroupKey, Group>, mode: Mode) -> BTreeSet<(String, String, String, String)> {
    // (suite, agent) -> setting -> params -> selection score (None if no selection metric).
    type Scores = BTreeMap<(String, String), BTreeMap<String, BTreeMap<String, Option<f64>>>>;
    let mut scores: Scores = BTreeMap::new();
    for (k, g) in groups {
        let slot = scores
            .entry((k.suite.clone(), k.agent.clone()))
            .or_default()
            .entry(k.setting.clone())
            .or_default()
            .entry(k.params.clone())
            .or_insert(None);
        if selection_metric(&k.suite) == Some(k.metric.as_str()) {
            *slot = Some(g.mean);
        }
    }
    let mut selected = BTreeSet::new();
    for ((suite, agent), settings) in &scores {
        let mut pick = |setting: &str, params: &str| {
            selected.insert((suite.clone(), setting.to_string(), agent.clone(), params.to_string()));
        };
        match mode {
            Mode::PerSetting => {
                for (setting, params) in settings {
                    let scored: Vec<(String, f64)> =
                        params.iter().filter_map(|(p, s)| s.map(|s| (p.clone(), s))).collect();
                    match scored.into_iter().min_by(by_mean) {
                        Some((best, _)) => pick(setting, &best),
                        None => params.keys().for_each(|p| pick(setting, p)),
                    }
                }
            }
            Mode::Global => {
                let candidates: BTreeSet<&String> = settings.values().flat_map(|p| p.keys()).collect();
                let averaged: Vec<(String, f64)> = candidates
                    .into_iter()
                    .filter_map(|p| {
                        let per: Option<Vec<f64>> = settings.values().map(|ps| ps.get(p).copied().flatten()).collect();
                        per.map(|v| (p.clone(), v.iter().sum::<f64>() / v.len() as f64))
                    })
                    .collect();
                match averaged.into_iter().min_by(by_mean) {
                    Some((best, _)) => settings.keys().for_each(|s| pick(s, &best)),
                    None => {
                        for (setting, params) in settings {
                            params.keys().for_each(|p| pick(setting, p));
                        }
                    }
                }
            }
        }
    }
    selected
}

fn sign_tests(
    groups: &BTreeMap<GroupKey, Group>,
    selected: &BTreeSet<(String, String, String, String)>,
) -> Vec<SignTestRow> {
    let mut cells: BTreeMap<(String, String, String), Vec<(&GroupKey, &Group)>> = BTreeMap::new();
    for (k, g) in groups {
        if selected.contains(&(k.suite.clone(), k.setting.clone(), k.agent.clone(), k.params.clone())) {
            cells.entry((k.suite.clone(), k.setting.clone(), k.metric.clone())).or_default().push((k, g));
        }
    }
    let mut out = Vec::new();
    for ((suite, setting, metric), members) in cells {
        for (i, (ka, ga)) in members.iter().enumerate() {
            for (kb, gb) in &members[i + 1..] {
                if ka.agent == kb.agent {
                    continue;
                }
                let (a, b): (Vec<f64>, Vec<f64>) =
                    ga.values.iter().filter_map(|(seed, x)| gb.values.get(seed).map(|y| (*x, *y))).unzip();
                if a.is_empty() {
                    continue;
                }
                let forward = paired_sign_test(&a, &b);
                let backward = paired_sign_test(&b, &a);
                out.push(SignTestRow {
                    suite: suite.clone(),
                    setting: setting.clone(),
                    metric: metric.clone(),
                    a: (ka.agent.clone(), ka.params.clone()),
                    b: (kb.agent.clone(), kb.params.clone()),
                    n_pairs: a.len(),
                    a_lower: forward.a_lower,
                    b_lower: forward.b_lower,
                    ties: forward.ties,
                    p_a_lower: forward.p_one_sided,
                    p_b_lower: backward.p_one_sided,
                    p_two_sided: forward.p_two_sided,
                });
            }
        }
    }
    out
}

impl Report {
    pub fn is_selected(&self, k: &GroupKey) -> bool {
        self.selected.contains(&(k.suite.clone(), k.setting.clone(), k.agent.clone(), k.params.clone()))
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for (k, g) in &self.groups {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                k.suite,
                k.setting,
                k.agent,
                k.params,
                k.metric,
                g.mean,
                g.std_error,
                g.values.len(),
                self.is_selected(k)
            ));
        }
        out
    }

    pub fn sign_test_csv(&self) -> String {
        let mut out = format!("{SIGN_TEST_HEADER}\n");
        for t in &self.sign_tests {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                t.suite,
                t.setting,
                t.metric,
                t.a.0,
                t.a.1,
                t.b.0,
                t.b.1,
                t.n_pairs,
                t.a_lower,
                t.b_lower,
                t.ties,
                t.p_a_lower,
                t.p_b_lower,
                t.p_two_sided
            ));
        }
        out
    }

    /// `bars_<metric>.tsv`: one `setting|agent<TAB>mean` line per selected group.
    pub fn bar_files(&self) -> Vec<(String, String)> {
        let mut bars: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
        for (k, g) in self.groups.iter().filter(|(k, _)| self.is_selected(k)) {
            bars.entry(&k.metric).or_default().push((format!("{}|{}", k.setting, k.agent), g.mean));
        }
        bars.into_iter().map(|(m, points)| (format!("bars_{m}.tsv"), render_tsv(points))).collect()
    }

    /// Seed-averaged regret curves for the selected bandit agents. With more
    /// than one bandit setting the files carry a setting index listed in
    /// `regret_settings.tsv`.
    pub fn regret_files(&self) -> CliResult<Vec<(String, String)>> {
        let chosen: Vec<(&GroupKey, &Group)> = self
            .groups
            .iter()
            .filter(|(k, _)| k.suite == "bandit" && k.metric == "final_regret" && self.is_selected(k))
            .collect();
        let settings: Vec<&String> =
            chosen.iter().map(|(k, _)| &k.setting).collect::<BTreeSet<_>>().into_iter().collect();
        let mut files = Vec::new();
        for (k, g) in &chosen {
            let mut total: Vec<f64> = Vec::new();
            let mut found = 0;
            for dir in g.sources.values() {
                let path = dir.join(format!("regret_{}.tsv", k.agent));
                let Ok(text) = fs::read_to_string(&path) else { continue };
                let curve = parse_curve(&path, &text)?;
                if found == 0 {
                    total = vec![0.0; curve.len()];
                } else if curve.len() != total.len() {
                    return Err(CliError::Schema { path, message: "regret curves differ in length".into() });
                }
                total.iter_mut().zip(&curve).for_each(|(t, c)| *t += c);
                found += 1;
            }
            if found == 0 {
                continue;
            }
            let points = total.iter().enumerate().map(|(t, v)| (t + 1, v / found as f64));
            let name = if settings.len() == 1 {
                format!("regret_{}.tsv", k.agent)
            } else {
                let idx = settings.iter().position(|s| **s == k.setting).unwrap();
                format!("regret_{}_{idx}.tsv", k.agent)
            };
            files.push((name, render_tsv(points)));
        }
        if settings.len() > 1 && !files.is_empty() {
            files.push((
                "regret_settings.tsv".into(),
                settings.iter().enumerate().map(|(i, s)| format!("{i}\t{s}\n")).collect(),
            ));
        }
        Ok(files)
    }

    pub fn write(&self, out: &Path) -> CliResult<()> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_file(&out.join(SUMMARY_FILE), &self.summary_csv())?;
        write_file(&out.join(SIGN_TEST_FILE), &self.sign_test_csv())?;
        for (name, contents) in self.bar_files().into_iter().chain(self.regret_files()?) {
            write_file(&out.join(name), &contents)?;
        }
        Ok(())
    }
}

fn parse_curve(path: &Path, text: &str) -> CliResult<Vec<f64>> {
    text.lines()
        .map(|line| {
            line.split_once('\t').and_then(|(_, y)| y.parse::<f64>().ok()).ok_or_else(|| CliError::Schema {
                path: path.to_path_buf(),
                message: format!("bad curve line '{line}'"),
            })
        })
        .collect()
}
