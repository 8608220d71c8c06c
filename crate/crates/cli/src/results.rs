//! `results.csv` rows and the run manifest.
//!
//! Columns, in order: `suite,agent,params,setting,metric,value,std_error,seed`.
//! `params` and `setting` are `;`-joined `key=value` lists. Numbers use the
//! shortest representation that parses back to the same `f64`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const HEADER: &str = "suite,agent,params,setting,metric,value,std_error,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub suite: String,
    pub agent: String,
    pub params: String,
    pub setting: String,
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn key(&self) -> (String, String, String, String, String, u64) {
        (
            self.suite.clone(),
            self.setting.clone(),
            self.agent.clone(),
            self.params.clone(),
            self.metric.clone(),
            self.seed,
        )
    }

    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.suite, self.agent, self.params, self.setting, self.metric, self.value, self.std_error, self.seed
        )
    }
}

/// `key=value` pairs joined with `;`.
pub fn join_pairs(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn check_field(field: &str) -> CliResult<()> {
    if field.contains([',', '\n', '"']) {
        return Err(CliError::Failed(format!("field '{field}' cannot be written without quoting")));
    }
    Ok(())
}

pub fn render_csv(rows: &[ResultRow]) -> CliResult<String> {
    let mut seen = BTreeSet::new();
    let mut out = String::from(HEADER);
    out.push('\n');
    for row in rows {
        for f in [&row.suite, &row.agent, &row.params, &row.setting, &row.metric] {
            check_field(f)?;
        }
        if !seen.insert(row.key()) {
            return Err(CliError::Failed(format!("duplicate result row {:?}", row.key())));
        }
        out.push_str(&row.to_line());
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_csv(path: &Path, text: &str) -> CliResult<Vec<ResultRow>> {
    let schema = |message: String| CliError::Schema { path: path.to_path_buf(), message };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        Some(h) => return Err(schema(format!("unexpected header '{h}'"))),
        None => return Err(schema("empty file".into())),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(schema(format!("line {}: expected 8 fields, found {}", i + 2, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| schema(format!("line {}: bad number '{s}'", i + 2)));
            Ok(ResultRow {
                suite: f[0].to_string(),
                agent: f[1].to_string(),
                params: f[2].to_string(),
                setting: f[3].to_string(),
                metric: f[4].to_string(),
                value: num(f[5])?,
                std_error: num(f[6])?,
                seed: f[7].parse().map_err(|_| schema(format!("line {}: bad seed '{}'", i + 2, f[7])))?,
            })
        })
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Two-column TSV: one `x<TAB>y` line per point, no header.
pub fn render_tsv<X: std::fmt::Display>(points: impl IntoIterator<Item = (X, f64)>) -> String {
    points.into_iter().map(|(x, y)| format!("{x}\t{y}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, value: f64) -> ResultRow {
        ResultRow {
            suite: "bandit".into(),
            agent: "ensemble-p".into(),
            params: "lambda=1".into(),
            setting: "d=2;N=4".into(),
            metric: metric.into(),
            value,
            std_error: 0.25,
            seed: 3,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![row("a", 0.1 + 0.2), row("b", f64::INFINITY), row("c", 1e-300)];
        let text = render_csv(&rows).unwrap();
        assert!(text.starts_with(HEADER));
        assert!(text.contains(",0.30000000000000004,"));
        assert_eq!(parse_csv(Path::new("x"), &text).unwrap(), rows);
    }

    #[test]
    fn duplicates_and_commas_rejected() {
        assert!(render_csv(&[row("a", 1.0), row("a", 2.0)]).is_err());
        let mut bad = row("a", 1.0);
        bad.params = "x=1,2".into();
        assert!(render_csv(&[bad]).is_err());
    }

    #[test]
    fn schema_checks() {
        assert!(matches!(parse_csv(Path::new("x"), "suite,agent\n"), Err(CliError::Schema { .. })));
        let text = format!("{HEADER}\na,b,c,d,e,1,2\n");
        assert!(parse_csv(Path::new("x"), &text).is_err());
    }

    #[test]
    fn tsv_layout() {
        assert_eq!(render_tsv([(1, 0.5), (2, 1.25)]), "1\t0.5\n2\t1.25\n");
    }
}
