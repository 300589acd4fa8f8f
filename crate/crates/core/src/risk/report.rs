use std::io::Write;
use std::path::Path;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::estimate::{
    conditional_overload_matrices, overload_risk, p_multistep, p_standalone, shed_risk, ConditionalMatrices,
    Estimate, RiskAt,
};
use super::{overload_indicator, shed_indicator, RiskConfig, RiskInputs, ShedCause, Source};
use crate::error::{Error, Result};

/// Risk by step. `standalone` covers every step; `multistep` and `total`
/// cover the steps whose window fits in the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSeries {
    pub standalone: Vec<f64>,
    pub multistep: Vec<f64>,
    pub total: Vec<f64>,
}

impl RiskSeries {
    fn build(horizon: usize, dt: usize, at: impl Fn(usize) -> RiskAt, standalone: impl Fn(usize) -> f64) -> Self {
        let windows: Vec<RiskAt> = (0..horizon - dt).map(at).collect();
        Self {
            standalone: (0..horizon).map(standalone).collect(),
            multistep: windows.iter().map(|r| r.multistep).collect(),
            total: windows.iter().map(|r| r.total).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShedMetrics {
    /// `system` or a zone name.
    pub scope: String,
    pub cause: ShedCause,
    pub p_standalone: Vec<Estimate>,
    pub p_multistep: Vec<Estimate>,
    pub risk: RiskSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMetrics {
    pub branch: usize,
    pub limit: f64,
    pub significant: bool,
    pub p_standalone: Vec<Estimate>,
    pub p_multistep: Vec<Estimate>,
    pub risk: RiskSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub source: Source,
    pub scenarios: usize,
    pub horizon: usize,
    pub config: RiskConfig,
    pub config_hash: Option<String>,
    pub zone_names: Vec<String>,
    /// Ids of the branches in the overloading risk sums, ranked.
    pub branch_set: Vec<usize>,
    pub shedding: Vec<ShedMetrics>,
    pub branches: Vec<BranchMetrics>,
    /// Overloading risk summed over `branch_set`.
    pub overload_risk: RiskSeries,
    /// One entry per step, over `branch_set`.
    pub conditional: Vec<ConditionalMatrices>,
}

impl RiskReport {
    pub fn shed(&self, scope: &str, cause: ShedCause) -> Option<&ShedMetrics> {
        self.shedding.iter().find(|s| s.scope == scope && s.cause == cause)
    }

    pub fn branch(&self, id: usize) -> Option<&BranchMetrics> {
        self.branches.iter().find(|b| b.branch == id)
    }

    /// Every probability in the report, for range checks.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let shed = self.shedding.iter().flat_map(|s| s.p_standalone.iter().chain(&s.p_multistep));
        let branch = self.branches.iter().flat_map(|b| b.p_standalone.iter().chain(&b.p_multistep));
        let cond = self.conditional.iter().flat_map(|c| {
            c.standalone.iter().chain(&c.multistep).chain(c.per_step.iter().flatten()).flatten()
        });
        shed.chain(branch).chain(cond).filter_map(|e| e.value)
    }
}

/// Computes every metric of one pathway. `branch_set` holds branch
/// positions for the overloading sums and conditional matrices.
pub fn assess(inputs: &RiskInputs, cfg: &RiskConfig, branch_set: &[usize]) -> Result<RiskReport> {
    let horizon = inputs.horizon();
    cfg.validate(horizon)?;
    if inputs.num_scenarios() == 0 {
        return Err(Error::InvalidParameter("no scenarios to assess".into()));
    }
    let dt = cfg.delta_t;
    let q = inputs.flows.len_of(Axis(2));
    if branch_set.iter().any(|&b| b >= q) || inputs.flow_limits.len() != q || inputs.branch_ids.len() != q {
        return Err(Error::Dimension("branch data do not match the flow table".into()));
    }

    let mut shedding = Vec::new();
    let scopes: Vec<(String, Option<usize>)> = std::iter::once(("system".to_string(), None))
        .chain(inputs.zone_names.iter().enumerate().map(|(z, n)| (n.clone(), Some(z))))
        .collect();
    for (cause, _) in &inputs.shed {
        for (scope, zone) in &scopes {
            let psi = inputs.shed_table(*cause, *zone).expect("cause present");
            let ind = shed_indicator(&psi, cfg.shed_tolerance);
            let risk = RiskSeries::build(
                horizon,
                dt,
                |t| shed_risk(psi.view(), t, dt, &cfg.shed_cost, cfg.discount),
                |t| psi.column(t).iter().map(|&p| super::shed_cost(p, &cfg.shed_cost)).sum::<f64>() / psi.nrows() as f64,
            );
            shedding.push(ShedMetrics {
                scope: scope.clone(),
                cause: *cause,
                p_standalone: (0..horizon).map(|t| p_standalone(ind.view(), t)).collect(),
                p_multistep: (0..horizon - dt).map(|t| p_multistep(ind.view(), t, dt)).collect(),
                risk,
            });
        }
    }

    let gamma = overload_indicator(&inputs.flows, &inputs.flow_limits, cfg.epsilon, cfg.overload_tolerance);
    let branch_risk = |set: &[usize]| {
        RiskSeries::build(
            horizon,
            dt,
            |t| overload_risk(inputs.flows.view(), &inputs.flow_limits, set, cfg.epsilon, t, dt, &cfg.overload_cost, cfg.discount),
            |t| {
                overload_risk(inputs.flows.view(), &inputs.flow_limits, set, cfg.epsilon, t, 0, &cfg.overload_cost, false)
                    .standalone
            },
        )
    };
    let branches = (0..q)
        .map(|b| {
            let ind = gamma.index_axis(Axis(2), b);
            BranchMetrics {
                branch: inputs.branch_ids[b],
                limit: inputs.flow_limits[b],
                significant: branch_set.contains(&b),
                p_standalone: (0..horizon).map(|t| p_standalone(ind, t)).collect(),
                p_multistep: (0..horizon - dt).map(|t| p_multistep(ind, t, dt)).collect(),
                risk: branch_risk(&[b]),
            }
        })
        .collect();

    Ok(RiskReport {
        source: inputs.source,
        scenarios: inputs.num_scenarios(),
        horizon,
        config: cfg.clone(),
        config_hash: None,
        zone_names: inputs.zone_names.clone(),
        branch_set: branch_set.iter().map(|&b| inputs.branch_ids[b]).collect(),
        shedding,
        branches,
        overload_risk: branch_risk(branch_set),
        conditional: (0..horizon).map(|t| conditional_overload_matrices(gamma.view(), branch_set, t, dt)).collect(),
    })
}

pub fn write_report_json(report: &RiskReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::format("risk report", e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<RiskReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format("risk report", e.to_string()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Long-format CSV: `metric,scope,cause,t,value,hits,count`, after a
/// `# config=<hash>` line when the report carries one. Undefined estimates
/// leave `value` empty.
pub fn write_report_csv(report: &RiskReport, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    if let Some(h) = &report.config_hash {
        writeln!(w, "# config={h}").map_err(io)?;
    }
    writeln!(w, "metric,scope,cause,t,value,hits,count").map_err(io)?;
    let est = |w: &mut dyn Write, metric: &str, scope: &str, cause: &str, series: &[Estimate]| {
        for (t, e) in series.iter().enumerate() {
            writeln!(w, "{metric},{scope},{cause},{},{},{},{}", t + 1, fmt_opt(e.value), e.hits, e.count)?;
        }
        Ok::<(), std::io::Error>(())
    };
    let risk = |w: &mut dyn Write, prefix: &str, scope: &str, cause: &str, r: &RiskSeries| {
        for (name, s) in [("standalone", &r.standalone), ("multistep", &r.multistep), ("total", &r.total)] {
            for (t, v) in s.iter().enumerate() {
                writeln!(w, "{prefix}_{name},{scope},{cause},{},{v},,", t + 1)?;
            }
        }
        Ok::<(), std::io::Error>(())
    };
    for s in &report.shedding {
        let c = s.cause.name();
        est(&mut w, "shed_p_standalone", &s.scope, c, &s.p_standalone).map_err(io)?;
        est(&mut w, "shed_p_multistep", &s.scope, c, &s.p_multistep).map_err(io)?;
        risk(&mut w, "shed_risk", &s.scope, c, &s.risk).map_err(io)?;
    }
    for b in &report.branches {
        let scope = format!("branch_{}", b.branch);
        est(&mut w, "overload_p_standalone", &scope, "", &b.p_standalone).map_err(io)?;
        est(&mut w, "overload_p_multistep", &scope, "", &b.p_multistep).map_err(io)?;
        risk(&mut w, "overload_risk", &scope, "", &b.risk).map_err(io)?;
    }
    risk(&mut w, "overload_risk", "branch_set", "", &report.overload_risk).map_err(io)?;
    for c in &report.conditional {
        for (name, m) in [("overload_cond_standalone", &c.standalone), ("overload_cond_multistep", &c.multistep)] {
            for (i, row) in m.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    let scope = format!("{}|{}", report.branch_set[j], report.branch_set[i]);
                    writeln!(w, "{name},{scope},,{},{},{},{}", c.t, fmt_opt(e.value), e.hits, e.count).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareThresholds {
    /// Largest tolerated absolute probability difference.
    pub probability: f64,
    /// Largest tolerated relative risk difference.
    pub risk_relative: f64,
    /// Risks are compared relative to `max(|reference|, risk_floor)`.
    pub risk_floor: f64,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        Self { probability: 0.05, risk_relative: 0.15, risk_floor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Probability,
    Risk,
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub kind: MetricKind,
    pub metric: String,
    pub scope: String,
    pub t: usize,
    pub reference: Option<f64>,
    pub candidate: Option<f64>,
    pub abs_diff: Option<f64>,
    /// Risks only.
    pub rel_diff: Option<f64>,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub config_hash: Option<String>,
    pub thresholds: CompareThresholds,
    pub rows: Vec<DivergenceRow>,
}

impl Divergence {
    pub fn any_exceeds(&self) -> bool {
        self.rows.iter().any(|r| r.exceeds)
    }

    pub fn max_abs(&self, kind: MetricKind) -> f64 {
        self.rows.iter().filter(|r| r.kind == kind).filter_map(|r| r.abs_diff).fold(0.0, f64::max)
    }

    pub fn max_rel(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.rel_diff).fold(0.0, f64::max)
    }
}

/// Differences of `candidate` from `reference` for every metric the two
/// reports share. Conditional matrices are listed but never exceed.
pub fn compare_pathways(
    reference: &RiskReport,
    candidate: &RiskReport,
    thresholds: &CompareThresholds,
) -> Result<Divergence> {
    if reference.horizon != candidate.horizon
        || reference.scenarios != candidate.scenarios
        || reference.config != candidate.config
        || reference.branch_set != candidate.branch_set
        || reference.config_hash != candidate.config_hash
    {
        return Err(Error::ConfigMismatch(
            "reports differ in horizon, scenario count, branch set or configuration".into(),
        ));
    }
    let th = thresholds;
    let mut rows = Vec::new();
    let probs = |rows: &mut Vec<DivergenceRow>, metric: &str, scope: &str, a: &[Estimate], b: &[Estimate]| {
        for (t, (x, y)) in a.iter().zip(b).enumerate() {
            rows.push(prob_row(MetricKind::Probability, metric, scope, t + 1, x, y, th));
        }
    };
    let risks = |rows: &mut Vec<DivergenceRow>, metric: &str, scope: &str, a: &[f64], b: &[f64]| {
        for (t, (&x, &y)) in a.iter().zip(b).enumerate() {
            rows.push(risk_row(metric, scope, t + 1, x, y, th));
        }
    };

    for s in &reference.shedding {
        let Some(o) = candidate.shed(&s.scope, s.cause) else { continue };
        let tag = |m: &str| format!("shed_{}_{m}", s.cause.name());
        probs(&mut rows, &tag("p_standalone"), &s.scope, &s.p_standalone, &o.p_standalone);
        probs(&mut rows, &tag("p_multistep"), &s.scope, &s.p_multistep, &o.p_multistep);
        risks(&mut rows, &tag("risk"), &s.scope, &s.risk.total, &o.risk.total);
    }
    for b in reference.branches.iter().filter(|b| b.significant) {
        let Some(o) = candidate.branch(b.branch) else { continue };
        let scope = format!("branch_{}", b.branch);
        probs(&mut rows, "overload_p_standalone", &scope, &b.p_standalone, &o.p_standalone);
        probs(&mut rows, "overload_p_multistep", &scope, &b.p_multistep, &o.p_multistep);
    }
    risks(&mut rows, "overload_risk", "branch_set", &reference.overload_risk.total, &candidate.overload_risk.total);
    for (c, d) in reference.conditional.iter().zip(&candidate.conditional) {
        for (i, (ri, di)) in c.standalone.iter().zip(&d.standalone).enumerate() {
            for (j, (x, y)) in ri.iter().zip(di).enumerate() {
                let scope = format!("{}|{}", reference.branch_set[j], reference.branch_set[i]);
                rows.push(prob_row(MetricKind::Conditional, "overload_cond_standalone", &scope, c.t, x, y, th));
            }
        }
    }
    Ok(Divergence { config_hash: reference.config_hash.clone(), thresholds: *thresholds, rows })
}

fn prob_row(
    kind: MetricKind,
    metric: &str,
    scope: &str,
    t: usize,
    x: &Estimate,
    y: &Estimate,
    th: &CompareThresholds,
) -> DivergenceRow {
    let abs_diff = x.value.zip(y.value).map(|(x, y)| (x - y).abs());
    DivergenceRow {
        kind,
        metric: metric.into(),
        scope: scope.into(),
        t,
        reference: x.value,
        candidate: y.value,
        abs_diff,
        rel_diff: None,
        exceeds: kind == MetricKind::Probability && abs_diff.is_some_and(|d| d > th.probability),
    }
}

fn risk_row(metric: &str, scope: &str, t: usize, x: f64, y: f64, th: &CompareThresholds) -> DivergenceRow {
    let rel = (x - y).abs() / x.abs().max(th.risk_floor);
    DivergenceRow {
        kind: MetricKind::Risk,
        metric: metric.into(),
        scope: scope.into(),
        t,
        reference: Some(x),
        candidate: Some(y),
        abs_diff: Some((x - y).abs()),
        rel_diff: Some(rel),
        exceeds: rel > th.risk_relative,
    }
}

pub fn write_divergence_csv(div: &Divergence, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    if let Some(h) = &div.config_hash {
        writeln!(w, "# config={h}").map_err(io)?;
    }
    writeln!(w, "kind,metric,scope,t,reference,candidate,abs_diff,rel_diff,exceeds").map_err(io)?;
    for r in &div.rows {
        let kind = match r.kind {
            MetricKind::Probability => "probability",
            MetricKind::Risk => "risk",
            MetricKind::Conditional => "conditional",
        };
        writeln!(
            w,
            "{kind},{},{},{},{},{},{},{},{}",
            r.metric,
            r.scope,
            r.t,
            fmt_opt(r.reference),
            fmt_opt(r.candidate),
            fmt_opt(r.abs_diff),
            fmt_opt(r.rel_diff),
            r.exceeds
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
