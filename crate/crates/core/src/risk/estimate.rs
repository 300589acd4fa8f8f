use ndarray::{ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::cost::{overload_cost, shed_cost, CostCurve};

/// A frequency estimate with its backing counts. `value` is `None` when no
/// scenario meets the conditioning event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Option<f64>,
    pub hits: usize,
    pub count: usize,
}

impl Estimate {
    pub fn ratio(hits: usize, count: usize) -> Self {
        let value = if count > 0 { Some(hits as f64 / count as f64) } else { None };
        Self { value, hits, count }
    }
}

/// Fraction of scenarios with the event at step `t` (0-based).
pub fn p_standalone(ind: ArrayView2<bool>, t: usize) -> Estimate {
    let col = ind.column(t);
    Estimate::ratio(col.iter().filter(|&&b| b).count(), col.len())
}

/// Fraction of the scenarios with the event at `t` that see it again at some
/// step of `t+1 ..= t+dt`.
pub fn p_multistep(ind: ArrayView2<bool>, t: usize, dt: usize) -> Estimate {
    assert!(t + dt < ind.ncols(), "window {t}+{dt} exceeds horizon {}", ind.ncols());
    let mut count = 0;
    let mut hits = 0;
    for row in ind.rows() {
        if row[t] {
            count += 1;
            if (t + 1..=t + dt).any(|s| row[s]) {
                hits += 1;
            }
        }
    }
    Estimate::ratio(hits, count)
}

/// Conditional overloading probabilities between branches at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMatrices {
    /// 1-based step.
    pub t: usize,
    /// `[i][j] = p(Γʲ_t | Γⁱ_t)`.
    pub standalone: Vec<Vec<Estimate>>,
    /// `[i][j] = p(⋃ Γʲ_{t'} over the window | Γⁱ_t)`; empty if the window
    /// leaves the horizon.
    pub multistep: Vec<Vec<Estimate>>,
    /// `[k][i][j] = p(Γʲ_{t+k+1} | Γⁱ_t)` for each step of the window.
    pub per_step: Vec<Vec<Vec<Estimate>>>,
}

/// Conditional matrices over the branch positions `branches` of the
/// `N × T × Q` overload indicators.
pub fn conditional_overload_matrices(
    gamma: ArrayView3<bool>,
    branches: &[usize],
    t: usize,
    dt: usize,
) -> ConditionalMatrices {
    let horizon = gamma.len_of(Axis(1));
    let cond = |i: usize, j: usize, steps: &[usize]| {
        let mut count = 0;
        let mut hits = 0;
        for row in gamma.outer_iter() {
            if row[[t, i]] {
                count += 1;
                if steps.iter().any(|&s| row[[s, j]]) {
                    hits += 1;
                }
            }
        }
        Estimate::ratio(hits, count)
    };
    let matrix = |steps: &[usize]| -> Vec<Vec<Estimate>> {
        branches.iter().map(|&i| branches.iter().map(|&j| cond(i, j, steps)).collect()).collect()
    };
    let window: Vec<usize> = (t + 1..=t + dt).collect();
    let fits = t + dt < horizon;
    ConditionalMatrices {
        t: t + 1,
        standalone: matrix(&[t]),
        multistep: if fits { matrix(&window) } else { Vec::new() },
        per_step: if fits { window.iter().map(|&s| matrix(&[s])).collect() } else { Vec::new() },
    }
}

/// Standalone, multi-step and overall risk at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAt {
    pub standalone: f64,
    pub multistep: f64,
    pub total: f64,
}

/// Expected cost at `t` and summed over the following `dt` steps, from an
/// `N × T` cost table. With `discount`, step `t + k` is weighted `1/(1+k)`.
pub fn risk_from_costs(costs: ArrayView2<f64>, t: usize, dt: usize, discount: bool) -> RiskAt {
    assert!(t + dt < costs.ncols(), "window {t}+{dt} exceeds horizon {}", costs.ncols());
    let n = costs.nrows().max(1) as f64;
    let mean = |s: usize| costs.column(s).sum() / n;
    let standalone = mean(t);
    let mut multistep = 0.0;
    for k in 1..=dt {
        let w = if discount { 1.0 / (1.0 + k as f64) } else { 1.0 };
        multistep += w * mean(t + k);
    }
    RiskAt { standalone, multistep, total: standalone + multistep }
}

/// Load-shedding risk from an `N × T` table of shed MW.
pub fn shed_risk(psi: ArrayView2<f64>, t: usize, dt: usize, curve: &CostCurve, discount: bool) -> RiskAt {
    let costs = psi.mapv(|p| shed_cost(p, curve));
    risk_from_costs(costs.view(), t, dt, discount)
}

/// Overloading risk summed over `branches`, from `N × T × Q` flows.
#[allow(clippy::too_many_arguments)]
pub fn overload_risk(
    flows: ArrayView3<f64>,
    limits: &[f64],
    branches: &[usize],
    epsilon: f64,
    t: usize,
    dt: usize,
    curve: &CostCurve,
    discount: bool,
) -> RiskAt {
    let mut acc = RiskAt { standalone: 0.0, multistep: 0.0, total: 0.0 };
    for &q in branches {
        let costs = flows.index_axis(Axis(2), q).mapv(|f| overload_cost(f, limits[q], epsilon, curve));
        let r = risk_from_costs(costs.view(), t, dt, discount);
        acc.standalone += r.standalone;
        acc.multistep += r.multistep;
    }
    acc.total = acc.standalone + acc.multistep;
    acc
}

/// Branch positions ranked by the scenario mean of `max_t |flow| / limit`,
/// highest first, ties by branch id; the first `k` are returned.
pub fn significant_branches(flows: ArrayView3<f64>, limits: &[f64], ids: &[usize], k: usize) -> Vec<usize> {
    let q = flows.len_of(Axis(2));
    let n = flows.len_of(Axis(0)).max(1) as f64;
    let mut score = vec![0.0; q];
    for scenario in flows.outer_iter() {
        for (i, s) in score.iter_mut().enumerate() {
            let peak = scenario.column(i).iter().fold(0.0f64, |m, f| m.max(f.abs()));
            *s += peak / limits[i];
        }
    }
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| (score[b] / n).total_cmp(&(score[a] / n)).then(ids[a].cmp(&ids[b])));
    order.truncate(k.min(q));
    order
}
