//! Plain-text case format.
//!
//! ```text
//! # comment
//! [meta]
//! name   six_bus
//! slack  1                 # optional; default is the first bus of the first zone
//!
//! [zone]
//! # id name
//! 1 I
//!
//! [bus]
//! # id zone base_load [x y]
//! 1 1 10
//!
//! [gen]
//! # id bus kind p_min p_max cost_linear cost_noload startup shutdown min_up min_down ramp
//! 1 1 thermal 10 90 12 150 300 50 3 2 45
//!
//! [branch]
//! # id from to reactance flow_limit
//! 1 1 2 0.2 60
//! ```
//!
//! Columns are whitespace separated; `#` starts a comment anywhere on a line.

use std::fmt::Write as _;
use std::str::FromStr;

use super::validate::{validate_grid, Violation};
use super::{Branch, Bus, GenKind, Generator, PowerGrid, Zone};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Zone,
    Bus,
    Gen,
    Branch,
}

fn field<T: FromStr>(cols: &[&str], k: usize, name: &str, line: usize) -> Result<T> {
    let raw = cols.get(k).ok_or_else(|| Error::Syntax {
        line,
        message: format!("missing column `{name}`"),
    })?;
    raw.parse().map_err(|_| Error::Syntax {
        line,
        message: format!("cannot parse `{name}` from `{raw}`"),
    })
}

fn expect_cols(cols: &[&str], allowed: &[usize], line: usize) -> Result<()> {
    if allowed.contains(&cols.len()) {
        Ok(())
    } else {
        Err(Error::Syntax {
            line,
            message: format!("expected {allowed:?} columns, found {}", cols.len()),
        })
    }
}

/// Parses and validates a case file.
pub fn parse_case(text: &str) -> Result<PowerGrid> {
    let mut section = Section::None;
    let mut name = String::from("case");
    let mut slack = None;
    let mut zones = Vec::new();
    let mut buses = Vec::new();
    let mut gens = Vec::new();
    let mut branches = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let tag = rest.strip_suffix(']').ok_or_else(|| Error::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            section = match tag.trim() {
                "meta" => Section::Meta,
                "zone" => Section::Zone,
                "bus" => Section::Bus,
                "gen" => Section::Gen,
                "branch" => Section::Branch,
                other => {
                    return Err(Error::Syntax { line, message: format!("unknown section `{other}`") })
                }
            };
            continue;
        }
        let cols: Vec<&str> = content.split_whitespace().collect();
        match section {
            Section::None => {
                return Err(Error::Syntax { line, message: "data before first section header".into() })
            }
            Section::Meta => {
                expect_cols(&cols, &[2], line)?;
                match cols[0] {
                    "name" => name = cols[1].to_string(),
                    "slack" => slack = Some(field(&cols, 1, "slack", line)?),
                    "base_mva" => {
                        let base: f64 = field(&cols, 1, "base_mva", line)?;
                        if base != super::BASE_MVA {
                            return Err(Error::Syntax {
                                line,
                                message: format!("only base_mva {} is supported", super::BASE_MVA),
                            });
                        }
                    }
                    other => {
                        return Err(Error::Syntax { line, message: format!("unknown meta key `{other}`") })
                    }
                }
            }
            Section::Zone => {
                expect_cols(&cols, &[2], line)?;
                zones.push(Zone { id: field(&cols, 0, "id", line)?, name: cols[1].to_string() });
            }
            Section::Bus => {
                expect_cols(&cols, &[3, 5], line)?;
                let coords = if cols.len() == 5 {
                    Some((field(&cols, 3, "x", line)?, field(&cols, 4, "y", line)?))
                } else {
                    None
                };
                buses.push(Bus {
                    id: field(&cols, 0, "id", line)?,
                    zone: field(&cols, 1, "zone", line)?,
                    base_load: field(&cols, 2, "base_load", line)?,
                    coords,
                });
            }
            Section::Gen => {
                expect_cols(&cols, &[12], line)?;
                let kind = match cols[2] {
                    "thermal" => GenKind::Thermal,
                    "wind" => GenKind::Wind,
                    other => {
                        return Err(Error::Syntax { line, message: format!("unknown generator kind `{other}`") })
                    }
                };
                gens.push(Generator {
                    id: field(&cols, 0, "id", line)?,
                    bus: field(&cols, 1, "bus", line)?,
                    kind,
                    p_min: field(&cols, 3, "p_min", line)?,
                    p_max: field(&cols, 4, "p_max", line)?,
                    cost_linear: field(&cols, 5, "cost_linear", line)?,
                    cost_noload: field(&cols, 6, "cost_noload", line)?,
                    startup_cost: field(&cols, 7, "startup", line)?,
                    shutdown_cost: field(&cols, 8, "shutdown", line)?,
                    min_up: field(&cols, 9, "min_up", line)?,
                    min_down: field(&cols, 10, "min_down", line)?,
                    ramp_rate: field(&cols, 11, "ramp", line)?,
                });
            }
            Section::Branch => {
                expect_cols(&cols, &[5], line)?;
                branches.push(Branch {
                    id: field(&cols, 0, "id", line)?,
                    from_bus: field(&cols, 1, "from", line)?,
                    to_bus: field(&cols, 2, "to", line)?,
                    reactance: field(&cols, 3, "reactance", line)?,
                    flow_limit: field(&cols, 4, "flow_limit", line)?,
                });
            }
        }
    }

    let grid = PowerGrid::new(name, buses, gens, branches, zones, slack);
    let report = validate_grid(&grid);
    // Structural errors get dedicated variants; everything else is reported together.
    for v in &report.violations {
        match *v {
            Violation::DanglingBus { kind, id, bus } => return Err(Error::DanglingBus { kind, id, bus }),
            Violation::Disconnected { bus } => return Err(Error::Disconnected(bus)),
            _ => {}
        }
    }
    if !report.is_empty() {
        return Err(Error::InvalidGrid(report.to_string()));
    }
    Ok(grid)
}

/// Deterministic writer; `parse_case(&serialize_case(g))` reproduces `g`.
pub fn serialize_case(grid: &PowerGrid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[meta]");
    let _ = writeln!(s, "name {}", grid.name);
    if grid.slack_explicit {
        let _ = writeln!(s, "slack {}", grid.slack_bus);
    }
    let _ = writeln!(s, "\n[zone]\n# id name");
    for z in &grid.zones {
        let _ = writeln!(s, "{} {}", z.id, z.name);
    }
    let _ = writeln!(s, "\n[bus]\n# id zone base_load [x y]");
    for b in &grid.buses {
        match b.coords {
            Some((x, y)) => {
                let _ = writeln!(s, "{} {} {} {} {}", b.id, b.zone, b.base_load, x, y);
            }
            None => {
                let _ = writeln!(s, "{} {} {}", b.id, b.zone, b.base_load);
            }
        }
    }
    let _ = writeln!(
        s,
        "\n[gen]\n# id bus kind p_min p_max cost_linear cost_noload startup shutdown min_up min_down ramp"
    );
    for g in &grid.generators {
        let kind = match g.kind {
            GenKind::Thermal => "thermal",
            GenKind::Wind => "wind",
        };
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            g.id,
            g.bus,
            kind,
            g.p_min,
            g.p_max,
            g.cost_linear,
            g.cost_noload,
            g.startup_cost,
            g.shutdown_cost,
            g.min_up,
            g.min_down,
            g.ramp_rate
        );
    }
    let _ = writeln!(s, "\n[branch]\n# id from to reactance flow_limit");
    for br in &grid.branches {
        let _ = writeln!(s, "{} {} {} {} {}", br.id, br.from_bus, br.to_bus, br.reactance, br.flow_limit);
    }
    s
}
