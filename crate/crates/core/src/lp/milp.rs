//! LP-based branch-and-bound.
//!
//! Open nodes are kept in a best-bound priority queue. After each branching
//! the up-child is re-solved immediately from the parent's factorization
//! (a plunge), the down-child is queued with a copy of the parent basis and
//! warm-started from it when popped. Branching picks the most fractional
//! integer column, ties broken by the smallest index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{Basis, Simplex};
use super::LinearProgram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { gap: 1e-4, node_limit: 10_000, integrality_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    Optimal,
    GapLimited,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub status: MilpStatus,
    pub nodes: usize,
}

struct Node {
    id: usize,
    bound: f64,
    changes: Vec<(usize, f64, f64)>,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smaller bound first, then older node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn gap_closed(incumbent: f64, bound: f64, gap: f64) -> bool {
    incumbent - bound <= gap * incumbent.abs().max(1.0)
}

pub fn solve_milp(lp: &LinearProgram, opts: &MilpOptions) -> Result<MilpSolution> {
    lp.check()?;
    let int_cols: Vec<usize> = (0..lp.num_vars()).filter(|&j| lp.integer[j]).collect();
    let mut sx = Simplex::new(lp);
    let root_bounds: Vec<(f64, f64)> = (0..lp.num_vars()).map(|j| sx.bounds(j)).collect();

    // Integer columns get integral bounds up front.
    for &j in &int_cols {
        let (lo, hi) = root_bounds[j];
        sx.set_bounds(j, lo.ceil(), hi.floor());
    }
    sx.solve()?;

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 1usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 1usize;
    let mut changes: Vec<(usize, f64, f64)> = Vec::new();
    let mut have_lp = true;

    loop {
        if have_lp {
            let obj = sx.objective() + lp.objective_offset;
            let prune = incumbent
                .as_ref()
                .is_some_and(|(inc, _)| gap_closed(*inc, obj, opts.gap));
            if !prune {
                match most_fractional(&sx, &int_cols, opts.integrality_tol) {
                    None => {
                        let x: Vec<f64> = (0..sx.num_structural()).map(|j| sx.value(j)).collect();
                        incumbent = Some((obj, x));
                    }
                    Some((j, v)) => {
                        let (lo, hi) = sx.bounds(j);
                        let mut down = changes.clone();
                        down.push((j, lo, v.floor()));
                        heap.push(Node { id: next_id, bound: obj, changes: down, basis: sx.basis() });
                        next_id += 1;
                        changes.push((j, v.ceil(), hi));
                        sx.set_bounds(j, v.ceil(), hi);
                        nodes += 1;
                        if nodes > opts.node_limit {
                            break;
                        }
                        have_lp = match sx.resolve() {
                            Ok(()) => true,
                            Err(Error::Infeasible) => false,
                            Err(e) => return Err(e),
                        };
                        continue;
                    }
                }
            }
        }

        // Pick the next queued node.
        let Some(node) = heap.pop() else { break };
        if let Some((inc, _)) = &incumbent {
            if gap_closed(*inc, node.bound, opts.gap) {
                // Everything left in the queue is at least this bound.
                heap.clear();
                break;
            }
        }
        nodes += 1;
        if nodes > opts.node_limit {
            heap.push(node);
            break;
        }
        for (j, &(lo, hi)) in root_bounds.iter().enumerate() {
            if lp.integer[j] {
                sx.set_bounds(j, lo.ceil(), hi.floor());
            } else {
                sx.set_bounds(j, lo, hi);
            }
        }
        for &(j, lo, hi) in &node.changes {
            sx.set_bounds(j, lo, hi);
        }
        if sx.load_basis(&node.basis).is_err() {
            sx.slack_basis();
        }
        changes = node.changes;
        have_lp = match sx.resolve() {
            Ok(()) => true,
            Err(Error::Infeasible) => false,
            Err(e) => return Err(e),
        };
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        None if heap.is_empty() => Err(Error::Infeasible),
        None => Err(Error::Solver(format!(
            "node limit {} reached without an integer solution",
            opts.node_limit
        ))),
        Some((obj, x)) => {
            let bound = open_bound.min(obj);
            let status = if heap.is_empty() || gap_closed(obj, bound, opts.gap) {
                MilpStatus::Optimal
            } else {
                MilpStatus::GapLimited
            };
            Ok(MilpSolution { x, objective: obj, bound, status, nodes })
        }
    }
}

fn most_fractional(sx: &Simplex, cols: &[usize], tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in cols {
        let v = sx.value(j);
        let frac = v - v.floor();
        if frac <= tol || frac >= 1.0 - tol {
            continue;
        }
        let score = (frac - 0.5).abs();
        if best.is_none_or(|(_, _, s)| score < s) {
            best = Some((j, v, score));
        }
    }
    best.map(|(j, v, _)| (j, v))
}
