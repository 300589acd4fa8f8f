//! MILP formulation of the DC security-constrained unit commitment.
//!
//! Per thermal unit `g` and step `t`:
//!
//! ```text
//! u[g,t] in {0,1}, v[g,t], w[g,t] in [0,1], P[g,t] in [0, p_max]
//! u[g,t] - u[g,t-1] - v[g,t] + w[g,t] = 0           (u[g,-1] = 1)
//! p_min u <= P <= p_max u
//! sum_{s=t-UT+1..t} v[g,s] <= u[g,t]
//! sum_{s=t-DT+1..t} w[g,s] <= 1 - u[g,t]
//! P[g,t] - P[g,t-1] <= R + p_min v[g,t]             (P[g,-1] = p_min)
//! P[g,t-1] - P[g,t] <= R + p_min w[g,t]
//! ```
//!
//! Per step: system balance `sum P + sum (wind - curt) + sum shed = sum load`,
//! spinning reserve `sum p_max u - sum P >= r * load`, and for every branch
//! `|PTDF (P_bus + wind - curt - load + shed)| <= limit`.

use crate::error::{Error, Result};
use crate::grid::{PowerGrid, PtdfMatrix};
use crate::lp::{LinearProgram, VarId};

use super::ScucConfig;

/// Column handles of one SCUC instance. Matrices are indexed `[g][t]` for
/// units and `[t][b]` for buses; `None` marks buses without load or wind.
#[derive(Debug, Clone)]
pub struct VarIndex {
    pub u: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    pub w: Vec<Vec<VarId>>,
    pub p: Vec<Vec<VarId>>,
    pub shed: Vec<Vec<Option<VarId>>>,
    pub curt: Vec<Vec<Option<VarId>>>,
}

/// Row counts by constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowCounts {
    pub balance: usize,
    pub gen_limits: usize,
    pub logic: usize,
    pub min_up: usize,
    pub min_down: usize,
    pub ramp: usize,
    pub reserve: usize,
    pub line: usize,
}

impl RowCounts {
    pub fn total(&self) -> usize {
        self.balance + self.gen_limits + self.logic + self.min_up + self.min_down + self.ramp + self.reserve + self.line
    }
}

/// One scenario's SCUC: the grid, its bus-level inputs and the MILP.
#[derive(Debug, Clone)]
pub struct ScucProblem<'a> {
    pub grid: &'a PowerGrid,
    pub ptdf: &'a PtdfMatrix,
    pub horizon: usize,
    /// `T × |V|` MW
    pub bus_load: Vec<Vec<f64>>,
    pub bus_wind: Vec<Vec<f64>>,
    pub config: ScucConfig,
    /// Positions of the thermal units in `grid.generators`.
    pub units: Vec<usize>,
    pub lp: LinearProgram,
    pub vars: VarIndex,
    pub rows: RowCounts,
    /// Line rows occupy the tail `lp.rows[line_start..]`.
    pub line_start: usize,
}

/// Shed penalty of bus position `b`: the configured penalty plus a small
/// position-dependent premium so that ties between buses resolve the same
/// way every time (later buses shed first).
pub fn bus_shed_penalty(config: &ScucConfig, b: usize, num_buses: usize) -> f64 {
    let span = (num_buses.max(2) - 1) as f64;
    config.shed_penalty * (1.0 + 1e-4 * (num_buses - 1 - b) as f64 / span)
}

pub fn build_scuc<'a>(
    grid: &'a PowerGrid,
    ptdf: &'a PtdfMatrix,
    bus_load: Vec<Vec<f64>>,
    bus_wind: Vec<Vec<f64>>,
    config: &ScucConfig,
) -> Result<ScucProblem<'a>> {
    let horizon = bus_load.len();
    let nb = grid.num_buses();
    if horizon == 0 {
        return Err(Error::Dimension("horizon must be at least 1".into()));
    }
    if bus_wind.len() != horizon || bus_load.iter().chain(&bus_wind).any(|r| r.len() != nb) {
        return Err(Error::Dimension(format!("bus series must be {horizon} x {nb}")));
    }
    if ptdf.num_buses() != nb || ptdf.num_branches() != grid.num_branches() {
        return Err(Error::Dimension("PTDF does not match grid".into()));
    }
    if bus_load.iter().chain(&bus_wind).flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("bus load and wind must be finite and nonnegative".into()));
    }
    config.validate(grid)?;

    let units = grid.thermal_units();
    let mut lp = LinearProgram::new();
    let mut vars = VarIndex { u: vec![], v: vec![], w: vec![], p: vec![], shed: vec![], curt: vec![] };
    for &gi in &units {
        let g = &grid.generators[gi];
        let mut u = Vec::with_capacity(horizon);
        let mut v = Vec::with_capacity(horizon);
        let mut w = Vec::with_capacity(horizon);
        let mut p = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            u.push(lp.add_binary(g.cost_noload));
            v.push(lp.add_var(g.startup_cost, 0.0, 1.0));
            w.push(lp.add_var(g.shutdown_cost, 0.0, 1.0));
            p.push(lp.add_var(g.cost_linear, 0.0, g.p_max));
        }
        vars.u.push(u);
        vars.v.push(v);
        vars.w.push(w);
        vars.p.push(p);
    }
    for t in 0..horizon {
        let mut shed = Vec::with_capacity(nb);
        let mut curt = Vec::with_capacity(nb);
        for b in 0..nb {
            let l = bus_load[t][b];
            shed.push((l > 0.0).then(|| lp.add_var(bus_shed_penalty(config, b, nb), 0.0, l)));
            let wv = bus_wind[t][b];
            curt.push((wv > 0.0).then(|| lp.add_var(0.0, 0.0, wv)));
        }
        vars.shed.push(shed);
        vars.curt.push(curt);
    }

    let mut rows = RowCounts::default();
    let inf = f64::INFINITY;

    for t in 0..horizon {
        let load: f64 = bus_load[t].iter().sum();
        let wind: f64 = bus_wind[t].iter().sum();
        let mut coeffs: Vec<(VarId, f64)> = vars.p.iter().map(|p| (p[t], 1.0)).collect();
        for b in 0..nb {
            if let Some(c) = vars.curt[t][b] {
                coeffs.push((c, -1.0));
            }
            if let Some(s) = vars.shed[t][b] {
                coeffs.push((s, 1.0));
            }
        }
        lp.add_row(&coeffs, load - wind, load - wind);
        rows.balance += 1;
    }

    for (k, &gi) in units.iter().enumerate() {
        let g = &grid.generators[gi];
        for t in 0..horizon {
            let (u, p) = (vars.u[k][t], vars.p[k][t]);
            lp.add_row(&[(p, 1.0), (u, -g.p_min)], 0.0, inf);
            lp.add_row(&[(p, 1.0), (u, -g.p_max)], -inf, 0.0);
            rows.gen_limits += 2;

            // u_t - u_{t-1} - v_t + w_t = 0 with the unit on before the horizon.
            let mut logic = vec![(u, 1.0), (vars.v[k][t], -1.0), (vars.w[k][t], 1.0)];
            let rhs = if t == 0 { 1.0 } else {
                logic.push((vars.u[k][t - 1], -1.0));
                0.0
            };
            lp.add_row(&logic, rhs, rhs);
            rows.logic += 1;

            let up: Vec<(VarId, f64)> = (t.saturating_sub(g.min_up.max(1) - 1)..=t)
                .map(|s| (vars.v[k][s], 1.0))
                .chain([(u, -1.0)])
                .collect();
            lp.add_row(&up, -inf, 0.0);
            rows.min_up += 1;
            let down: Vec<(VarId, f64)> = (t.saturating_sub(g.min_down.max(1) - 1)..=t)
                .map(|s| (vars.w[k][s], 1.0))
                .chain([(u, 1.0)])
                .collect();
            lp.add_row(&down, -inf, 1.0);
            rows.min_down += 1;

            let r = g.ramp_rate;
            if t == 0 {
                lp.add_row(&[(p, 1.0), (vars.v[k][t], -g.p_min)], -inf, r + g.p_min);
                lp.add_row(&[(p, -1.0), (vars.w[k][t], -g.p_min)], -inf, r - g.p_min);
            } else {
                let prev = vars.p[k][t - 1];
                lp.add_row(&[(p, 1.0), (prev, -1.0), (vars.v[k][t], -g.p_min)], -inf, r);
                lp.add_row(&[(prev, 1.0), (p, -1.0), (vars.w[k][t], -g.p_min)], -inf, r);
            }
            rows.ramp += 2;
        }
    }

    for t in 0..horizon {
        let load: f64 = bus_load[t].iter().sum();
        let mut coeffs = Vec::with_capacity(2 * units.len());
        for (k, &gi) in units.iter().enumerate() {
            coeffs.push((vars.u[k][t], grid.generators[gi].p_max));
            coeffs.push((vars.p[k][t], -1.0));
        }
        lp.add_row(&coeffs, config.reserve_fraction * load, inf);
        rows.reserve += 1;
    }

    let line_start = lp.num_rows();
    let unit_bus: Vec<usize> = units
        .iter()
        .map(|&gi| grid.bus_index(grid.generators[gi].bus).expect("validated grid"))
        .collect();
    for t in 0..horizon {
        for (q, br) in grid.branches.iter().enumerate() {
            let row = ptdf.entries.row(q);
            let mut coeffs = Vec::new();
            let mut fixed = 0.0;
            for b in 0..nb {
                let a = row[b];
                if a.abs() < 1e-12 {
                    continue;
                }
                fixed += a * (bus_wind[t][b] - bus_load[t][b]);
                if let Some(c) = vars.curt[t][b] {
                    coeffs.push((c, -a));
                }
                if let Some(s) = vars.shed[t][b] {
                    coeffs.push((s, a));
                }
            }
            for (k, &b) in unit_bus.iter().enumerate() {
                if row[b].abs() >= 1e-12 {
                    coeffs.push((vars.p[k][t], row[b]));
                }
            }
            lp.add_row(&coeffs, -br.flow_limit - fixed, br.flow_limit - fixed);
            rows.line += 1;
        }
    }

    Ok(ScucProblem { grid, ptdf, horizon, bus_load, bus_wind, config: *config, units, lp, vars, rows, line_start })
}

impl ScucProblem<'_> {
    /// The same problem with commitments fixed to `uc` and no integrality.
    /// Line rows are dropped unless `enforce_lines`.
    pub fn fixed_uc_lp(&self, uc: &[Vec<bool>], enforce_lines: bool) -> LinearProgram {
        let mut lp = self.lp.clone();
        if !enforce_lines {
            lp.rows.truncate(self.line_start);
        }
        for (k, row) in self.vars.u.iter().enumerate() {
            for (t, &u) in row.iter().enumerate() {
                let x = if uc[k][t] { 1.0 } else { 0.0 };
                lp.lower[u.0] = x;
                lp.upper[u.0] = x;
                lp.integer[u.0] = false;
            }
        }
        lp
    }
}
