use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gnn::{Head, MreTable};
use crate::risk::{Estimate, RiskReport, RiskSeries, Source};

fn source_name(s: Source) -> &'static str {
    match s {
        Source::Milp => "milp",
        Source::Gnn => "gnn",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

struct Table {
    name: &'static str,
    body: String,
}

impl Table {
    fn new(name: &'static str, header: &str) -> Self {
        Self { name, body: format!("{header}\n") }
    }

    fn row(&mut self, cells: std::fmt::Arguments<'_>) {
        writeln!(self.body, "{cells}").expect("string write");
    }
}

fn probabilities(t: &mut Table, src: &str, scope: &str, cause: &str, series: &[Estimate]) {
    for (k, e) in series.iter().enumerate() {
        t.row(format_args!("{src},{scope},{cause},{},{},{},{}", k + 1, opt(e.value), e.hits, e.count));
    }
}

fn risks(t: &mut Table, src: &str, scope: &str, cause: &str, r: &RiskSeries) {
    for (k, s) in r.standalone.iter().enumerate() {
        let m = r.multistep.get(k).map(|v| v.to_string()).unwrap_or_default();
        let tot = r.total.get(k).map(|v| v.to_string()).unwrap_or_default();
        t.row(format_args!("{src},{scope},{cause},{},{s},{m},{tot}", k + 1));
    }
}

/// Flattens risk reports and MRE tables into one CSV per figure series:
///
/// * `mre_<head>.csv`: error by target and step
/// * `shed_standalone.csv`, `shed_multistep.csv`: shedding probabilities by
///   scope and cause
/// * `shed_risk.csv`: shedding risk by scope and cause
/// * `overload_standalone.csv`, `overload_multistep.csv`: per-branch
///   overloading probabilities
/// * `overload_risk.csv`: per-branch and branch-set overloading risk
/// * `overload_conditional.csv`: conditional overloading matrices
pub fn write_figures(
    dir: &Path,
    hash: &str,
    reports: &[RiskReport],
    mre: &[(Head, MreTable)],
) -> Result<Vec<PathBuf>> {
    let prob_header = "source,scope,cause,t,probability,hits,count";
    let risk_header = "source,scope,cause,t,standalone,multistep,total";
    let mut shed_sa = Table::new("shed_standalone.csv", prob_header);
    let mut shed_ms = Table::new("shed_multistep.csv", prob_header);
    let mut shed_risk = Table::new("shed_risk.csv", risk_header);
    let mut ov_sa = Table::new("overload_standalone.csv", prob_header);
    let mut ov_ms = Table::new("overload_multistep.csv", prob_header);
    let mut ov_risk = Table::new("overload_risk.csv", risk_header);
    let mut cond = Table::new(
        "overload_conditional.csv",
        "source,t,given,branch,standalone,standalone_hits,standalone_count,multistep,multistep_hits,multistep_count",
    );
    for r in reports {
        let src = source_name(r.source);
        for s in &r.shedding {
            let c = s.cause.name();
            probabilities(&mut shed_sa, src, &s.scope, c, &s.p_standalone);
            probabilities(&mut shed_ms, src, &s.scope, c, &s.p_multistep);
            risks(&mut shed_risk, src, &s.scope, c, &s.risk);
        }
        for b in r.branches.iter().filter(|b| b.significant) {
            let scope = format!("branch_{}", b.branch);
            probabilities(&mut ov_sa, src, &scope, "", &b.p_standalone);
            probabilities(&mut ov_ms, src, &scope, "", &b.p_multistep);
            risks(&mut ov_risk, src, &scope, "", &b.risk);
        }
        risks(&mut ov_risk, src, "branch_set", "", &r.overload_risk);
        for c in &r.conditional {
            for (i, row) in c.standalone.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    let m = c.multistep.get(i).and_then(|r| r.get(j));
                    cond.row(format_args!(
                        "{src},{},{},{},{},{},{},{},{},{}",
                        c.t,
                        r.branch_set[i],
                        r.branch_set[j],
                        opt(e.value),
                        e.hits,
                        e.count,
                        opt(m.and_then(|m| m.value)),
                        m.map_or(String::new(), |m| m.hits.to_string()),
                        m.map_or(String::new(), |m| m.count.to_string()),
                    ));
                }
            }
        }
    }

    let mut tables: Vec<(String, String)> = mre
        .iter()
        .map(|(head, table)| (format!("mre_{}.csv", head.name().replace('-', "_")), table.to_csv()))
        .collect();
    for t in [shed_sa, shed_ms, shed_risk, ov_sa, ov_ms, ov_risk, cond] {
        tables.push((t.name.to_string(), t.body));
    }
    let mut written = Vec::with_capacity(tables.len());
    for (name, body) in tables {
        let path = dir.join(name);
        fs::write(&path, format!("# config={hash}\n{body}")).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
