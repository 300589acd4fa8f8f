use std::collections::{HashSet, VecDeque};
use std::fmt;

use super::{GenKind, PowerGrid};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId { kind: &'static str, id: usize },
    NegativeLoad { bus: usize },
    UnknownZone { bus: usize, zone: usize },
    EmptyZone { zone: usize },
    DanglingBus { kind: &'static str, id: usize, bus: usize },
    GeneratorLimits { gen: usize },
    NegativeCost { gen: usize },
    WindParameters { gen: usize },
    NonPositiveReactance { branch: usize },
    NonPositiveLimit { branch: usize },
    SelfLoop { branch: usize },
    MissingSlack { bus: usize },
    Disconnected { bus: usize },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Violation::NegativeLoad { bus } => write!(f, "bus {bus} has negative base load"),
            Violation::UnknownZone { bus, zone } => write!(f, "bus {bus} is in undeclared zone {zone}"),
            Violation::EmptyZone { zone } => write!(f, "zone {zone} has no buses"),
            Violation::DanglingBus { kind, id, bus } => write!(f, "{kind} {id} references missing bus {bus}"),
            Violation::GeneratorLimits { gen } => write!(f, "generator {gen} violates 0 <= p_min <= p_max"),
            Violation::NegativeCost { gen } => write!(f, "generator {gen} has a negative cost or ramp"),
            Violation::WindParameters { gen } => {
                write!(f, "wind generator {gen} must have zero energy cost and zero min up/down")
            }
            Violation::NonPositiveReactance { branch } => write!(f, "branch {branch} has reactance <= 0"),
            Violation::NonPositiveLimit { branch } => write!(f, "branch {branch} has flow limit <= 0"),
            Violation::SelfLoop { branch } => write!(f, "branch {branch} connects a bus to itself"),
            Violation::MissingSlack { bus } => write!(f, "slack bus {bus} does not exist"),
            Violation::Disconnected { bus } => write!(f, "bus {bus} is not connected to the slack bus"),
            Violation::Empty => write!(f, "grid has no buses"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every violated grid invariant; an empty report means the grid is usable.
pub fn validate_grid(grid: &PowerGrid) -> ValidationReport {
    let mut out = Vec::new();
    if grid.buses.is_empty() {
        out.push(Violation::Empty);
        return ValidationReport { violations: out };
    }

    let mut seen = HashSet::new();
    for b in &grid.buses {
        if !seen.insert(b.id) {
            out.push(Violation::DuplicateId { kind: "bus", id: b.id });
        }
    }
    let mut seen = HashSet::new();
    for g in &grid.generators {
        if !seen.insert(g.id) {
            out.push(Violation::DuplicateId { kind: "generator", id: g.id });
        }
    }
    let mut seen = HashSet::new();
    for br in &grid.branches {
        if !seen.insert(br.id) {
            out.push(Violation::DuplicateId { kind: "branch", id: br.id });
        }
    }
    let mut seen = HashSet::new();
    for z in &grid.zones {
        if !seen.insert(z.id) {
            out.push(Violation::DuplicateId { kind: "zone", id: z.id });
        }
    }

    for b in &grid.buses {
        if !(b.base_load >= 0.0) {
            out.push(Violation::NegativeLoad { bus: b.id });
        }
        if grid.zone_index(b.zone).is_none() {
            out.push(Violation::UnknownZone { bus: b.id, zone: b.zone });
        }
    }
    for z in &grid.zones {
        if !grid.buses.iter().any(|b| b.zone == z.id) {
            out.push(Violation::EmptyZone { zone: z.id });
        }
    }

    for g in &grid.generators {
        if grid.bus_index(g.bus).is_none() {
            out.push(Violation::DanglingBus { kind: "generator", id: g.id, bus: g.bus });
        }
        if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
            out.push(Violation::GeneratorLimits { gen: g.id });
        }
        let costs = [g.cost_linear, g.cost_noload, g.startup_cost, g.shutdown_cost, g.ramp_rate];
        if costs.iter().any(|c| !(*c >= 0.0)) {
            out.push(Violation::NegativeCost { gen: g.id });
        }
        if g.kind == GenKind::Wind && (g.cost_linear != 0.0 || g.min_up != 0 || g.min_down != 0) {
            out.push(Violation::WindParameters { gen: g.id });
        }
    }

    for br in &grid.branches {
        for bus in [br.from_bus, br.to_bus] {
            if grid.bus_index(bus).is_none() {
                out.push(Violation::DanglingBus { kind: "branch", id: br.id, bus });
            }
        }
        if !(br.reactance > 0.0) {
            out.push(Violation::NonPositiveReactance { branch: br.id });
        }
        if !(br.flow_limit > 0.0) {
            out.push(Violation::NonPositiveLimit { branch: br.id });
        }
        if br.from_bus == br.to_bus {
            out.push(Violation::SelfLoop { branch: br.id });
        }
    }

    match grid.bus_index(grid.slack_bus) {
        None => out.push(Violation::MissingSlack { bus: grid.slack_bus }),
        Some(root) => {
            let adj = grid.adjacency();
            let mut reached = vec![false; grid.num_buses()];
            let mut queue = VecDeque::from([root]);
            reached[root] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !reached[v] {
                        reached[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            if let Some(i) = reached.iter().position(|r| !r) {
                out.push(Violation::Disconnected { bus: grid.buses[i].id });
            }
        }
    }

    ValidationReport { violations: out }
}
