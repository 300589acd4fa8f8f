//! Security-constrained unit commitment: formulation, solves, the
//! reserve/non-reserve shedding split and label extraction.

mod labels;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PowerGrid, PtdfMatrix};
use crate::lp::milp::{solve_milp as branch_and_bound, MilpOptions, MilpStatus};
use crate::lp::{solve_lp, LinearProgram};
use crate::scenario::ScenarioSet;

pub use labels::{
    label_one, label_scenarios, read_labels_csv, write_labels_csv, LabelLayout, LabelOptions, LabelRecord, LabelSet,
    LabelStatus,
};
pub use model::{build_scuc, bus_shed_penalty, RowCounts, ScucProblem, VarIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScucConfig {
    /// Spinning reserve as a fraction of system load.
    pub reserve_fraction: f64,
    /// $/MWh of shed load.
    pub shed_penalty: f64,
    pub gap: f64,
    pub node_limit: usize,
}

impl Default for ScucConfig {
    fn default() -> Self {
        Self { reserve_fraction: 0.05, shed_penalty: 1000.0, gap: 1e-4, node_limit: 10_000 }
    }
}

impl ScucConfig {
    pub fn validate(&self, grid: &PowerGrid) -> Result<()> {
        if !(0.0..1.0).contains(&self.reserve_fraction) {
            return Err(Error::InvalidParameter(format!(
                "reserve_fraction {} outside [0, 1)",
                self.reserve_fraction
            )));
        }
        let worst = grid.generators.iter().map(|g| g.cost_linear).fold(0.0, f64::max);
        if !(self.shed_penalty > worst) {
            return Err(Error::InvalidParameter(format!(
                "shed_penalty {} must exceed every generator cost ({worst})",
                self.shed_penalty
            )));
        }
        if !(self.gap >= 0.0) || self.node_limit == 0 {
            return Err(Error::InvalidParameter("gap must be >= 0 and node_limit >= 1".into()));
        }
        Ok(())
    }

    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions { gap: self.gap, node_limit: self.node_limit, ..MilpOptions::default() }
    }
}

/// Thermal commitment, `u[g][t]` in the order of `grid.thermal_units()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcSchedule {
    pub u: Vec<Vec<bool>>,
}

impl UcSchedule {
    pub fn all_on(units: usize, horizon: usize) -> Self {
        Self { u: vec![vec![true; horizon]; units] }
    }

    /// Whether the schedule honours minimum up and down times, given that
    /// every unit has been on long enough before the horizon.
    pub fn respects_min_times(&self, grid: &PowerGrid) -> bool {
        grid.thermal_units().iter().zip(&self.u).all(|(&gi, row)| {
            let g = &grid.generators[gi];
            let mut prev = true;
            for (t, &on) in row.iter().enumerate() {
                if on && !prev {
                    // Started at t: must stay on for min_up steps (or to the horizon end).
                    if row[t..].iter().take(g.min_up).any(|&x| !x) {
                        return false;
                    }
                }
                if !on && prev && row[t..].iter().take(g.min_down).any(|&x| x) {
                    return false;
                }
                prev = on;
            }
            true
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    GapLimited,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScucSolution {
    pub uc: UcSchedule,
    /// `[g][t]` MW
    pub dispatch: Vec<Vec<f64>>,
    /// `[t][b]` MW
    pub shed: Vec<Vec<f64>>,
    /// `[t][b]` MW of curtailed wind
    pub curtail: Vec<Vec<f64>>,
    /// `[t][q]` MW
    pub flows: Vec<Vec<f64>>,
    pub objective: f64,
    /// Proven lower bound (equal to `objective` for LP solves).
    pub bound: f64,
    pub status: SolveStatus,
    pub nodes: usize,
}

fn unpack(problem: &ScucProblem<'_>, x: &[f64]) -> ScucSolution {
    let v = &problem.vars;
    let uc = UcSchedule { u: v.u.iter().map(|r| r.iter().map(|id| x[id.0] > 0.5).collect()).collect() };
    let dispatch = v.p.iter().map(|r| r.iter().map(|id| x[id.0]).collect()).collect();
    let pick = |m: &Vec<Vec<Option<crate::lp::VarId>>>| -> Vec<Vec<f64>> {
        m.iter().map(|r| r.iter().map(|o| o.map_or(0.0, |id| x[id.0].max(0.0))).collect()).collect()
    };
    let shed = pick(&v.shed);
    let curtail = pick(&v.curt);
    let mut sol = ScucSolution {
        uc,
        dispatch,
        shed,
        curtail,
        flows: vec![],
        objective: 0.0,
        bound: 0.0,
        status: SolveStatus::Optimal,
        nodes: 0,
    };
    sol.flows = (0..problem.horizon)
        .map(|t| problem.ptdf.flows(&net_injections(problem.grid, &problem.bus_load, &problem.bus_wind, &sol, t)))
        .collect();
    sol
}

/// Net injection per bus at step `t`: thermal output plus used wind minus
/// served load.
pub fn net_injections(
    grid: &PowerGrid,
    bus_load: &[Vec<f64>],
    bus_wind: &[Vec<f64>],
    sol: &ScucSolution,
    t: usize,
) -> Vec<f64> {
    let mut inj: Vec<f64> = (0..grid.num_buses())
        .map(|b| bus_wind[t][b] - sol.curtail[t][b] - bus_load[t][b] + sol.shed[t][b])
        .collect();
    for (k, &gi) in grid.thermal_units().iter().enumerate() {
        let b = grid.bus_index(grid.generators[gi].bus).expect("validated grid");
        inj[b] += sol.dispatch[k][t];
    }
    inj
}

/// Solves the full SCUC by branch-and-bound.
pub fn solve_milp(problem: &ScucProblem<'_>) -> Result<ScucSolution> {
    let res = branch_and_bound(&problem.lp, &problem.config.milp_options()).map_err(|e| match e {
        // Shed and curtailment slacks make every instance feasible.
        Error::Infeasible => Error::Solver("SCUC reported infeasible despite shed slacks".into()),
        other => other,
    })?;
    let mut sol = unpack(problem, &res.x);
    sol.objective = res.objective;
    sol.bound = res.bound;
    sol.nodes = res.nodes;
    sol.status = match res.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::GapLimited => SolveStatus::GapLimited,
    };
    Ok(sol)
}

/// Dispatch LP with commitments fixed to `uc`. With `enforce_line_limits`
/// off, only the reserve, limit, ramp and balance constraints remain.
pub fn solve_dispatch_fixed_uc(
    problem: &ScucProblem<'_>,
    uc: &UcSchedule,
    enforce_line_limits: bool,
) -> Result<ScucSolution> {
    if uc.u.len() != problem.units.len() || uc.u.iter().any(|r| r.len() != problem.horizon) {
        return Err(Error::Dimension("UC schedule does not match problem".into()));
    }
    if !uc.respects_min_times(problem.grid) {
        return Err(Error::InvalidParameter("UC schedule violates minimum up/down times".into()));
    }
    let lp: LinearProgram = problem.fixed_uc_lp(&uc.u, enforce_line_limits);
    let res = solve_lp(&lp)?;
    let mut sol = unpack(problem, &res.x);
    sol.uc = uc.clone();
    sol.objective = res.objective;
    sol.bound = res.objective;
    Ok(sol)
}

/// Shed split by cause, per zone (`[z][t]`) plus system totals (`[t]`).
#[derive(Debug, Clone, PartialEq)]
pub struct CauseAwareShed {
    pub total_zone: Vec<Vec<f64>>,
    pub reserve_zone: Vec<Vec<f64>>,
    pub nonreserve_zone: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub reserve: Vec<f64>,
    pub nonreserve: Vec<f64>,
    /// Entries (system and zonal) where the reserve component exceeded the
    /// total by more than 1e-6 MW and the difference was clamped to zero.
    pub clamped: usize,
}

/// Sums `[t][b]` bus values into `[z][t]` zonal values.
pub fn zonal_sums(grid: &PowerGrid, per_bus: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let zone_of = grid.bus_zone_indices();
    let mut out = vec![vec![0.0; per_bus.len()]; grid.num_zones()];
    for (t, row) in per_bus.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            out[zone_of[b]][t] += v;
        }
    }
    out
}

pub fn split_shed(grid: &PowerGrid, total: &ScucSolution, reserve: &ScucSolution) -> CauseAwareShed {
    let total_zone = zonal_sums(grid, &total.shed);
    let reserve_zone = zonal_sums(grid, &reserve.shed);
    let sys = |z: &Vec<Vec<f64>>| -> Vec<f64> {
        (0..z.first().map_or(0, |r| r.len())).map(|t| z.iter().map(|r| r[t]).sum()).collect()
    };
    let mut clamped = 0;
    let mut diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                if y - x > 1e-6 {
                    clamped += 1;
                }
                (x - y).max(0.0)
            })
            .collect()
    };
    let nonreserve_zone: Vec<Vec<f64>> = total_zone.iter().zip(&reserve_zone).map(|(a, b)| diff(a, b)).collect();
    let (total_sys, reserve_sys) = (sys(&total_zone), sys(&reserve_zone));
    let nonreserve = diff(&total_sys, &reserve_sys);
    CauseAwareShed {
        total: total_sys,
        reserve: reserve_sys,
        nonreserve,
        total_zone,
        reserve_zone,
        nonreserve_zone,
        clamped,
    }
}

/// Runs the full MILP, then the fixed-commitment dispatch without line
/// limits; the difference of the two shed amounts is the non-reserve part.
pub fn cause_aware_shedding(problem: &ScucProblem<'_>) -> Result<(ScucSolution, ScucSolution, CauseAwareShed)> {
    let full = solve_milp(problem)?;
    let reserve = solve_dispatch_fixed_uc(problem, &full.uc, false)?;
    let split = split_shed(problem.grid, &full, &reserve);
    Ok((full, reserve, split))
}

/// Aggregated quantities of interest of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Qoi {
    /// `[z][t]` thermal output by zone.
    pub thermal_zone: Vec<Vec<f64>>,
    pub thermal_system: Vec<f64>,
    /// `[z][t]` shed load by zone of the shed bus.
    pub shed_zone: Vec<Vec<f64>>,
    pub shed_system: Vec<f64>,
    /// `[t][b]` net injections.
    pub injections: Vec<Vec<f64>>,
    /// `[t][q]` PTDF flows of the injections.
    pub flows: Vec<Vec<f64>>,
}

pub fn extract_qois(
    solution: &ScucSolution,
    grid: &PowerGrid,
    ptdf: &PtdfMatrix,
    bus_load: &[Vec<f64>],
    bus_wind: &[Vec<f64>],
) -> Qoi {
    let horizon = bus_load.len();
    let zone_of = grid.bus_zone_indices();
    let mut thermal_zone = vec![vec![0.0; horizon]; grid.num_zones()];
    for (k, &gi) in grid.thermal_units().iter().enumerate() {
        let z = zone_of[grid.bus_index(grid.generators[gi].bus).expect("validated grid")];
        for t in 0..horizon {
            thermal_zone[z][t] += solution.dispatch[k][t];
        }
    }
    let shed_zone = zonal_sums(grid, &solution.shed);
    let system = |z: &Vec<Vec<f64>>| (0..horizon).map(|t| z.iter().map(|r| r[t]).sum()).collect();
    let injections: Vec<Vec<f64>> =
        (0..horizon).map(|t| net_injections(grid, bus_load, bus_wind, solution, t)).collect();
    let flows = injections.iter().map(|p| ptdf.flows(p)).collect();
    Qoi {
        thermal_system: system(&thermal_zone),
        shed_system: system(&shed_zone),
        thermal_zone,
        shed_zone,
        injections,
        flows,
    }
}

/// Builds the SCUC of scenario `n` of `set`.
pub fn problem_for_scenario<'a>(
    grid: &'a PowerGrid,
    ptdf: &'a PtdfMatrix,
    set: &ScenarioSet,
    n: usize,
    config: &ScucConfig,
) -> Result<ScucProblem<'a>> {
    let profile = set.bus_profile(grid, n)?;
    build_scuc(grid, ptdf, profile.load, profile.wind, config)
}
