//! Fixture runner: each fixture is a CLI invocation plus expected `key=value`
//! outputs. `{root}` expands to the directory above the fixture file and
//! `{out}` to a scratch directory unique to the fixture.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::Parser;
use serde::Deserialize;

use crate::commands::{dispatch, Cli, CliError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub fixtures: Vec<Fixture>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub args: Vec<String>,
    pub expect: Vec<Expectation>,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub key: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub equals: Option<String>,
    #[serde(default)]
    pub greater_than: Option<f64>,
    #[serde(default)]
    pub less_than: Option<f64>,
}

const DEFAULT_TOL: f64 = 5e-3;

fn parse_output(out: &str) -> BTreeMap<String, String> {
    out.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Returns `None` on success, otherwise a description of the mismatch.
fn check(e: &Expectation, got: Option<&String>) -> Option<String> {
    let Some(got) = got else {
        return Some(format!("{}: missing", e.key));
    };
    if let Some(want) = &e.equals {
        return (got != want).then(|| format!("{}: got {got}, want {want}", e.key));
    }
    let x: f64 = match got.parse() {
        Ok(x) => x,
        Err(_) => return Some(format!("{}: {got} is not a number", e.key)),
    };
    if let Some(want) = e.value {
        let tol = e.tol.unwrap_or(DEFAULT_TOL);
        if !((x - want).abs() <= tol) {
            return Some(format!("{}: got {x}, want {want} ± {tol}", e.key));
        }
    }
    if let Some(lo) = e.greater_than {
        if !(x > lo) {
            return Some(format!("{}: got {x}, want > {lo}", e.key));
        }
    }
    if let Some(hi) = e.less_than {
        if !(x < hi) {
            return Some(format!("{}: got {x}, want < {hi}", e.key));
        }
    }
    None
}

pub fn reproduce(path: &Path, only: Option<&str>) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let file: FixtureFile =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("bad fixture file {}: {e}", path.display())))?;
    let root = path
        .canonicalize()
        .ok()
        .and_then(|p| p.parent().and_then(Path::parent).map(Path::to_path_buf))
        .ok_or_else(|| CliError::Validation(format!("cannot resolve root of {}", path.display())))?;
    let scratch = std::env::temp_dir().join(format!("equiquench-repro-{}", std::process::id()));

    let mut report = String::new();
    let mut failures = 0;
    let mut ran = 0;
    for fx in file.fixtures.iter().filter(|f| only.map_or(true, |o| o == f.name)) {
        ran += 1;
        let out_dir = scratch.join(&fx.name);
        let argv: Vec<String> = std::iter::once("equiquench".to_string())
            .chain(fx.args.iter().map(|a| {
                a.replace("{root}", &root.to_string_lossy()).replace("{out}", &out_dir.to_string_lossy())
            }))
            .collect();
        let start = Instant::now();
        let problems: Vec<String> = match Cli::try_parse_from(&argv) {
            Err(e) => vec![format!("argument error: {e}")],
            Ok(cli) => match dispatch(&cli.command) {
                Ok(out) => {
                    let kv = parse_output(&out);
                    fx.expect.iter().filter_map(|e| check(e, kv.get(&e.key))).collect()
                }
                Err(e) => vec![format!("command failed (exit {}): {e}", e.exit_code())],
            },
        };
        let secs = start.elapsed().as_secs_f64();
        let status = if problems.is_empty() { "PASS" } else { "FAIL" };
        writeln!(report, "{status} {:<28} {:>3} checks {secs:>7.2}s  {}", fx.name, fx.expect.len(), fx.source).unwrap();
        for p in &problems {
            writeln!(report, "     {p}").unwrap();
        }
        failures += usize::from(!problems.is_empty());
    }
    let _ = fs::remove_dir_all(&scratch);
    if ran == 0 {
        return Err(CliError::Validation(format!("no fixture matches {:?}", only.unwrap_or(""))));
    }
    writeln!(report, "fixtures={ran} failed={failures}").unwrap();
    if failures == 0 {
        Ok(report)
    } else {
        Err(CliError::SuiteFailure(report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(json: &str) -> Expectation {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn numeric_and_string_checks() {
        let v = "0.0842".to_string();
        assert!(check(&exp(r#"{"key":"a","value":0.084}"#), Some(&v)).is_none());
        assert!(check(&exp(r#"{"key":"a","value":0.09}"#), Some(&v)).is_some());
        assert!(check(&exp(r#"{"key":"a","greater_than":0.1}"#), Some(&v)).is_some());
        assert!(check(&exp(r#"{"key":"a","less_than":0.1}"#), Some(&v)).is_none());
        let s = "UphillFaster".to_string();
        assert!(check(&exp(r#"{"key":"a","equals":"UphillFaster"}"#), Some(&s)).is_none());
        assert!(check(&exp(r#"{"key":"a","equals":"Symmetric"}"#), None).is_some());
    }

    #[test]
    fn output_parsing_skips_free_text() {
        let kv = parse_output("PASS suite\nbeta0_hot.kl=0.08\nx = 1\n");
        assert_eq!(kv.get("beta0_hot.kl").map(String::as_str), Some("0.08"));
        assert_eq!(kv.get("x").map(String::as_str), Some("1"));
        assert_eq!(kv.len(), 2);
    }
}
