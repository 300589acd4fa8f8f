use ndarray::Array2;

use super::Head;
use crate::error::{Error, Result};
use crate::grid::{GenKind, PowerGrid};
use crate::scenario::{BusProfile, ScenarioSet};
use crate::scuc::{LabelRecord, LabelSet, LabelStatus};

/// Static features per node, ahead of the load and wind series.
pub const NUM_STATIC: usize = 8;

pub fn input_dim(horizon: usize) -> usize {
    NUM_STATIC + 2 * horizon
}

/// Static node features, each in `[0, 1]`: bus-type one-hot
/// (generator, load, both, neither), installed capacity, degree, zone
/// position and base load. Capacity, degree and load are divided by their
/// grid-wide maximum.
pub fn static_features(grid: &PowerGrid) -> Array2<f64> {
    let n = grid.num_buses();
    let mut cap = vec![0.0; n];
    let mut has_gen = vec![false; n];
    for g in &grid.generators {
        if let Some(b) = grid.bus_index(g.bus) {
            has_gen[b] = true;
            cap[b] += g.p_max;
        }
    }
    let degree: Vec<f64> = grid.adjacency().iter().map(|a| a.len() as f64).collect();
    let zone_of = grid.bus_zone_indices();
    let zone_den = grid.num_zones().saturating_sub(1).max(1) as f64;
    let max_of = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let (cap_max, deg_max) = (max_of(&cap), max_of(&degree));
    let loads: Vec<f64> = grid.buses.iter().map(|b| b.base_load).collect();
    let load_max = max_of(&loads);
    let scaled = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };

    let mut out = Array2::zeros((n, NUM_STATIC));
    for b in 0..n {
        let has_load = loads[b] > 0.0;
        let kind = match (has_gen[b], has_load) {
            (true, false) => 0,
            (false, true) => 1,
            (true, true) => 2,
            (false, false) => 3,
        };
        out[[b, kind]] = 1.0;
        out[[b, 4]] = scaled(cap[b], cap_max);
        out[[b, 5]] = scaled(degree[b], deg_max);
        out[[b, 6]] = zone_of[b] as f64 / zone_den;
        out[[b, 7]] = scaled(loads[b], load_max);
    }
    out
}

/// Raw (unnormalized) input matrix, `|V| × (8 + 2T)`: static features, then
/// the bus load series and the bus wind series in MW.
pub fn node_features(statics: &Array2<f64>, profile: &BusProfile) -> Array2<f64> {
    let horizon = profile.load.len();
    let n = statics.nrows();
    let mut x = Array2::zeros((n, input_dim(horizon)));
    for b in 0..n {
        for k in 0..NUM_STATIC {
            x[[b, k]] = statics[[b, k]];
        }
        for t in 0..horizon {
            x[[b, NUM_STATIC + t]] = profile.load[t][b];
            x[[b, NUM_STATIC + horizon + t]] = profile.wind[t][b];
        }
    }
    x
}

/// Shared graph structure: neighbor lists and readout pools. Graph-level
/// heads pool each zone and then the whole grid; the node head has no pools.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub adjacency: Vec<Vec<usize>>,
    pub pools: Vec<Vec<usize>>,
    /// One name per output row: pool names, or bus ids for the node head.
    pub row_names: Vec<String>,
}

impl GraphSpec {
    pub fn for_grid(grid: &PowerGrid, head: Head) -> Self {
        let adjacency = grid.adjacency();
        if head.is_graph_level() {
            let mut pools = grid.zone_members();
            pools.push((0..grid.num_buses()).collect());
            let mut row_names: Vec<String> = grid.zones.iter().map(|z| format!("zone_{}", z.name)).collect();
            row_names.push("system".into());
            Self { adjacency, pools, row_names }
        } else {
            let row_names = grid.buses.iter().map(|b| format!("bus_{}", b.id)).collect();
            Self { adjacency, pools: Vec::new(), row_names }
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Output rows per sample.
    pub fn num_rows(&self) -> usize {
        if self.pools.is_empty() {
            self.num_nodes()
        } else {
            self.pools.len()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub scenario: usize,
    /// Raw inputs, `|V| × D_I`.
    pub features: Array2<f64>,
    /// Targets in MW, `rows × T`.
    pub target: Array2<f64>,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub head: Head,
    pub horizon: usize,
    pub graph: GraphSpec,
    pub samples: Vec<GraphSample>,
}

/// Physical output bounds in MW. Generation lies in `[0, Σ p_max]` of the
/// pool's thermal units, shedding in `[0, pool load]`, and a bus injection
/// in `[-load, p_max + wind]`.
pub fn bounds(grid: &PowerGrid, head: Head, profile: &BusProfile) -> (Array2<f64>, Array2<f64>) {
    let horizon = profile.load.len();
    let graph = GraphSpec::for_grid(grid, head);
    let rows = graph.num_rows();
    let mut lower = Array2::zeros((rows, horizon));
    let mut upper = Array2::zeros((rows, horizon));
    let mut thermal_cap = vec![0.0; grid.num_buses()];
    for g in &grid.generators {
        if g.kind == GenKind::Thermal {
            if let Some(b) = grid.bus_index(g.bus) {
                thermal_cap[b] += g.p_max;
            }
        }
    }
    match head {
        Head::Generation | Head::Shedding => {
            for (k, pool) in graph.pools.iter().enumerate() {
                for t in 0..horizon {
                    upper[[k, t]] = pool
                        .iter()
                        .map(|&b| if head == Head::Generation { thermal_cap[b] } else { profile.load[t][b] })
                        .sum();
                }
            }
        }
        Head::BranchFlow => {
            for b in 0..rows {
                for t in 0..horizon {
                    lower[[b, t]] = -profile.load[t][b];
                    upper[[b, t]] = thermal_cap[b] + profile.wind[t][b];
                }
            }
        }
    }
    (lower, upper)
}

/// Label targets of one record, `rows × T` in MW.
pub fn targets(head: Head, record: &LabelRecord, horizon: usize) -> Array2<f64> {
    match head {
        Head::Generation | Head::Shedding => {
            let zonal = if head == Head::Generation { &record.thermal_zone } else { &record.shed_zone };
            let z = zonal.len();
            let mut y = Array2::zeros((z + 1, horizon));
            for (k, row) in zonal.iter().enumerate() {
                for t in 0..horizon {
                    y[[k, t]] = row[t];
                    y[[z, t]] += row[t];
                }
            }
            y
        }
        Head::BranchFlow => {
            let buses = record.injections.first().map_or(0, Vec::len);
            Array2::from_shape_fn((buses, horizon), |(b, t)| record.injections[t][b])
        }
    }
}

/// Pairs every labelled scenario with its graph inputs. Failed labels are
/// skipped.
pub fn encode_features(grid: &PowerGrid, set: &ScenarioSet, labels: &LabelSet, head: Head) -> Result<Dataset> {
    if set.n != labels.records.len() {
        return Err(Error::Dimension(format!(
            "{} scenarios but {} label records",
            set.n,
            labels.records.len()
        )));
    }
    if set.horizon != labels.horizon() {
        return Err(Error::Dimension(format!(
            "scenario horizon {} but label horizon {}",
            set.horizon,
            labels.horizon()
        )));
    }
    labels.check_grid(grid)?;
    let statics = static_features(grid);
    let graph = GraphSpec::for_grid(grid, head);
    let mut samples = Vec::with_capacity(set.n);
    for (n, record) in labels.records.iter().enumerate() {
        if record.scenario != n {
            return Err(Error::Dimension(format!("label record {n} belongs to scenario {}", record.scenario)));
        }
        if record.status == LabelStatus::Failed {
            continue;
        }
        let profile = set.bus_profile(grid, n)?;
        let (lower, upper) = bounds(grid, head, &profile);
        samples.push(GraphSample {
            scenario: n,
            features: node_features(&statics, &profile),
            target: targets(head, record, set.horizon),
            lower,
            upper,
        });
    }
    Ok(Dataset { head, horizon: set.horizon, graph, samples })
}
