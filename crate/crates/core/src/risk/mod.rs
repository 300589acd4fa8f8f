//! Reliability and risk metrics for load shedding and branch overloading.
//!
//! Steps are 0-based in function arguments and 1-based in reports.

mod cost;
mod estimate;
mod report;

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

pub use cost::{overload_cost, shed_cost, CostCurve};
pub use estimate::{
    conditional_overload_matrices, overload_risk, p_multistep, p_standalone, risk_from_costs, shed_risk,
    significant_branches, ConditionalMatrices, Estimate, RiskAt,
};
pub use report::{
    assess, compare_pathways, read_report_json, write_divergence_csv, write_report_csv, write_report_json,
    BranchMetrics, CompareThresholds, Divergence, DivergenceRow, MetricKind, RiskReport, RiskSeries, ShedMetrics,
};

use crate::error::{Error, Result};
use crate::grid::PowerGrid;
use crate::scuc::{LabelSet, LabelStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Milp,
    Gnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShedCause {
    Total,
    Reserve,
    NonReserve,
}

impl ShedCause {
    pub fn name(self) -> &'static str {
        match self {
            ShedCause::Total => "total",
            ShedCause::Reserve => "reserve",
            ShedCause::NonReserve => "non-reserve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// Multi-step window length in steps.
    pub delta_t: usize,
    /// Shed MW above which a step counts as shedding.
    pub shed_tolerance: f64,
    /// MW above `epsilon · limit` at which a branch counts as overloaded.
    pub overload_tolerance: f64,
    /// Security fraction of the branch limit.
    pub epsilon: f64,
    pub shed_cost: CostCurve,
    pub overload_cost: CostCurve,
    /// Weight future steps by `1/(1+Δt)`.
    pub discount: bool,
    /// Number of significant branches in the overloading risk sums; `None`
    /// uses every branch.
    pub significant: Option<usize>,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            delta_t: 2,
            shed_tolerance: 1e-3,
            overload_tolerance: 0.0,
            epsilon: 0.85,
            shed_cost: CostCurve::Constant { rate: 10.0 },
            overload_cost: CostCurve::Constant { rate: 1.0 },
            discount: false,
            significant: Some(4),
        }
    }
}

impl RiskConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.delta_t == 0 || self.delta_t >= horizon {
            return Err(Error::InvalidParameter(format!(
                "window {} must lie in 1..{horizon} for horizon {horizon}",
                self.delta_t
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} must lie in (0, 1]", self.epsilon)));
        }
        if !(self.shed_tolerance >= 0.0) || !(self.overload_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be >= 0".into()));
        }
        self.shed_cost.validate()?;
        self.overload_cost.validate()
    }
}

/// Scenario-level quantities one pathway feeds into the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskInputs {
    pub source: Source,
    /// Scenario indices, for provenance.
    pub scenarios: Vec<usize>,
    pub zone_names: Vec<String>,
    /// Shed MW, `N × Z × T`, by cause. Only `Total` is required.
    pub shed: Vec<(ShedCause, Array3<f64>)>,
    /// Branch flows, `N × T × Q`.
    pub flows: Array3<f64>,
    pub branch_ids: Vec<usize>,
    pub flow_limits: Vec<f64>,
}

impl RiskInputs {
    pub fn horizon(&self) -> usize {
        self.flows.len_of(Axis(1))
    }

    pub fn num_scenarios(&self) -> usize {
        self.flows.len_of(Axis(0))
    }

    /// `N × T` shed MW for a zone, or the system when `zone` is `None`.
    pub fn shed_table(&self, cause: ShedCause, zone: Option<usize>) -> Option<Array2<f64>> {
        let (_, zonal) = self.shed.iter().find(|(c, _)| *c == cause)?;
        Some(match zone {
            Some(z) => zonal.index_axis(Axis(1), z).to_owned(),
            None => zonal.sum_axis(Axis(1)),
        })
    }

    /// MILP inputs from the label records at `idx`; failed records are
    /// skipped.
    pub fn from_labels(grid: &PowerGrid, labels: &LabelSet, idx: &[usize]) -> Result<Self> {
        labels.check_grid(grid)?;
        let horizon = labels.horizon();
        let keep: Vec<usize> =
            idx.iter().copied().filter(|&i| labels.records[i].status != LabelStatus::Failed).collect();
        let (z, q) = (grid.num_zones(), grid.num_branches());
        let mut total = Array3::zeros((keep.len(), z, horizon));
        let mut reserve = total.clone();
        let mut nonreserve = total.clone();
        let mut flows = Array3::zeros((keep.len(), horizon, q));
        for (n, &i) in keep.iter().enumerate() {
            let r = &labels.records[i];
            for k in 0..z {
                for t in 0..horizon {
                    total[[n, k, t]] = r.shed_zone[k][t];
                    reserve[[n, k, t]] = r.reserve_shed_zone[k][t];
                    nonreserve[[n, k, t]] = r.nonreserve_shed_zone[k][t];
                }
            }
            for t in 0..horizon {
                for b in 0..q {
                    flows[[n, t, b]] = r.flows[t][b];
                }
            }
        }
        Ok(Self {
            source: Source::Milp,
            scenarios: keep.iter().map(|&i| labels.records[i].scenario).collect(),
            zone_names: grid.zones.iter().map(|z| z.name.clone()).collect(),
            shed: vec![(ShedCause::Total, total), (ShedCause::Reserve, reserve), (ShedCause::NonReserve, nonreserve)],
            flows,
            branch_ids: grid.branches.iter().map(|b| b.id).collect(),
            flow_limits: grid.branches.iter().map(|b| b.flow_limit).collect(),
        })
    }
}

/// Binary event tables of one pathway.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub source: Source,
    /// System shedding, `N × T`.
    pub shed: Array2<bool>,
    /// Branch overloading, `N × T × Q`.
    pub overload: Array3<bool>,
}

pub fn shed_indicator(psi: &Array2<f64>, tolerance: f64) -> Array2<bool> {
    psi.mapv(|p| p > tolerance)
}

pub fn overload_indicator(flows: &Array3<f64>, limits: &[f64], epsilon: f64, tolerance: f64) -> Array3<bool> {
    Array3::from_shape_fn(flows.dim(), |(n, t, q)| flows[[n, t, q]].abs() > epsilon * limits[q] + tolerance)
}

impl IndicatorSeries {
    pub fn from_inputs(inputs: &RiskInputs, cfg: &RiskConfig) -> Self {
        let psi = inputs.shed_table(ShedCause::Total, None).unwrap_or_else(|| {
            Array2::zeros((inputs.num_scenarios(), inputs.horizon()))
        });
        Self {
            source: inputs.source,
            shed: shed_indicator(&psi, cfg.shed_tolerance),
            overload: overload_indicator(&inputs.flows, &inputs.flow_limits, cfg.epsilon, cfg.overload_tolerance),
        }
    }
}
