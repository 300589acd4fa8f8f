//! Static grid data: buses, generators, branches and zones.

mod case;
mod ptdf;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use case::{parse_case, serialize_case};
pub use ptdf::{compute_ptdf, PtdfMatrix};
pub use validate::{validate_grid, ValidationReport, Violation};

/// System base used to convert between MW and per unit.
pub const BASE_MVA: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub zone: usize,
    /// Nominal demand in MW.
    pub base_load: f64,
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Thermal,
    Wind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub kind: GenKind,
    pub p_min: f64,
    pub p_max: f64,
    /// $/MWh
    pub cost_linear: f64,
    /// $/h while committed
    pub cost_noload: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    /// Hours.
    pub min_up: usize,
    pub min_down: usize,
    /// MW/h
    pub ramp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per unit on [`BASE_MVA`].
    pub reactance: f64,
    /// MW
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub name: String,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub zones: Vec<Zone>,
    pub slack_bus: usize,
    /// Whether `slack_bus` came from the case file rather than the default rule.
    pub slack_explicit: bool,
    bus_pos: HashMap<usize, usize>,
}

impl PowerGrid {
    /// Assembles a grid without validation. A `slack_bus` of `None` selects
    /// the first bus of the first zone.
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
        zones: Vec<Zone>,
        slack_bus: Option<usize>,
    ) -> Self {
        let bus_pos = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let default_slack = zones
            .first()
            .and_then(|z| buses.iter().find(|b| b.zone == z.id))
            .or(buses.first())
            .map_or(0, |b| b.id);
        Self {
            name: name.into(),
            slack_bus: slack_bus.unwrap_or(default_slack),
            slack_explicit: slack_bus.is_some(),
            buses,
            generators,
            branches,
            zones,
            bus_pos,
        }
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }

    /// Position of a bus id in `buses`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    /// Position of a zone id in `zones`.
    pub fn zone_index(&self, id: usize) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    /// Zone position of every bus position.
    pub fn bus_zone_indices(&self) -> Vec<usize> {
        self.buses
            .iter()
            .map(|b| self.zone_index(b.zone).unwrap_or(usize::MAX))
            .collect()
    }

    /// Bus positions of each zone, in zone order.
    pub fn zone_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.zones.len()];
        for (i, z) in self.bus_zone_indices().into_iter().enumerate() {
            if z != usize::MAX {
                members[z].push(i);
            }
        }
        members
    }

    pub fn thermal_units(&self) -> Vec<usize> {
        self.gens_of(GenKind::Thermal)
    }

    pub fn wind_units(&self) -> Vec<usize> {
        self.gens_of(GenKind::Wind)
    }

    fn gens_of(&self, kind: GenKind) -> Vec<usize> {
        (0..self.generators.len())
            .filter(|&g| self.generators[g].kind == kind)
            .collect()
    }

    /// Neighbor lists by bus position (parallel branches collapse to one edge).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            let (Some(f), Some(t)) = (self.bus_index(br.from_bus), self.bus_index(br.to_bus)) else {
                continue;
            };
            if !adj[f].contains(&t) {
                adj[f].push(t);
            }
            if !adj[t].contains(&f) {
                adj[t].push(f);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Per-bus share of its zone's load, proportional to `base_load`.
    pub fn load_factors(&self) -> Vec<f64> {
        let zone_of = self.bus_zone_indices();
        let mut totals = vec![0.0; self.zones.len()];
        for (b, &z) in self.buses.iter().zip(&zone_of) {
            totals[z] += b.base_load;
        }
        self.buses
            .iter()
            .zip(&zone_of)
            .map(|(b, &z)| if totals[z] > 0.0 { b.base_load / totals[z] } else { 0.0 })
            .collect()
    }

    /// Per-bus share of its zone's wind output, proportional to installed
    /// wind capacity at the bus.
    pub fn wind_factors(&self) -> Vec<f64> {
        let cap = self.wind_capacity_by_bus();
        let zone_of = self.bus_zone_indices();
        let mut totals = vec![0.0; self.zones.len()];
        for (c, &z) in cap.iter().zip(&zone_of) {
            totals[z] += c;
        }
        cap.iter()
            .zip(&zone_of)
            .map(|(c, &z)| if totals[z] > 0.0 { c / totals[z] } else { 0.0 })
            .collect()
    }

    pub fn wind_capacity_by_bus(&self) -> Vec<f64> {
        let mut cap = vec![0.0; self.buses.len()];
        for g in &self.generators {
            if g.kind == GenKind::Wind {
                if let Some(b) = self.bus_index(g.bus) {
                    cap[b] += g.p_max;
                }
            }
        }
        cap
    }

    /// Number of wind units per zone.
    pub fn wind_units_per_zone(&self) -> Vec<usize> {
        let mut count = vec![0; self.zones.len()];
        for g in &self.generators {
            if g.kind == GenKind::Wind {
                if let Some(z) = self.bus_index(g.bus).and_then(|b| self.zone_index(self.buses[b].zone)) {
                    count[z] += 1;
                }
            }
        }
        count
    }

    /// Zone pairs joined by at least one branch.
    pub fn zones_adjacent(&self, a: usize, b: usize) -> bool {
        let zone_of = self.bus_zone_indices();
        self.branches.iter().any(|br| {
            let (Some(f), Some(t)) = (self.bus_index(br.from_bus), self.bus_index(br.to_bus)) else {
                return false;
            };
            let (zf, zt) = (zone_of[f], zone_of[t]);
            (zf == a && zt == b) || (zf == b && zt == a)
        })
    }
}

/// Bundled fixtures.
pub mod fixtures {
    use super::{parse_case, PowerGrid};

    pub const SIX_BUS: &str = include_str!("../../data/six_bus.case");
    pub const TWO_BUS: &str = include_str!("../../data/two_bus.case");
    pub const THREE_BUS_CONGESTED: &str = include_str!("../../data/three_bus_congested.case");

    /// Three-zone six-bus grid with three thermal units and one wind unit.
    pub fn six_bus() -> PowerGrid {
        parse_case(SIX_BUS).expect("bundled six-bus case is valid")
    }

    pub fn two_bus() -> PowerGrid {
        parse_case(TWO_BUS).expect("bundled two-bus case is valid")
    }

    /// Triangle whose cheap unit sits behind a tight branch.
    pub fn three_bus_congested() -> PowerGrid {
        parse_case(THREE_BUS_CONGESTED).expect("bundled three-bus case is valid")
    }
}
