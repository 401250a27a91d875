//! Result files: `results.csv`, `summary.json` and one `ecdf_<tuple>.csv` per tuple.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiment::{ResultSet, TupleSummary};
use super::stats::ecdf;
use crate::error::Result;

pub fn results_csv(rs: &ResultSet) -> String {
    let mut s = String::from("tuple,scenario,user,kind,rate_bps,power_w\n");
    for r in &rs.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            rs.tuples[r.tuple].name(),
            r.scenario,
            r.user,
            r.kind.label(),
            r.rate_bps,
            r.power_w
        );
    }
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    scenarios: usize,
    tuples: Vec<TupleSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failures: Vec<Failure<'a>>,
}

#[derive(Serialize)]
struct Failure<'a> {
    tuple: String,
    scenario: usize,
    error: &'a str,
}

pub fn summary_json(rs: &ResultSet) -> Result<String> {
    let summary = Summary {
        seed: rs.seed,
        scenarios: rs.scenarios,
        tuples: (0..rs.tuples.len()).map(|t| rs.summary(t)).collect(),
        failures: rs
            .runs
            .iter()
            .filter_map(|r| {
                r.error.as_deref().map(|error| Failure {
                    tuple: rs.tuples[r.tuple].name(),
                    scenario: r.scenario,
                    error,
                })
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    Ok(s)
}

/// Pooled rate ECDF of one tuple: `rate_bps,cdf`.
pub fn ecdf_csv(rs: &ResultSet, tuple: usize) -> Result<String> {
    let mut s = String::from("rate_bps,cdf\n");
    for (x, p) in ecdf(&rs.rates(tuple, None))? {
        let _ = writeln!(s, "{x},{p}");
    }
    Ok(s)
}

pub fn write_outputs(rs: &ResultSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(rs))?;
    fs::write(dir.join("summary.json"), summary_json(rs)?)?;
    for (i, t) in rs.tuples.iter().enumerate() {
        fs::write(dir.join(format!("ecdf_{}.csv", t.name())), ecdf_csv(rs, i)?)?;
    }
    Ok(())
}
