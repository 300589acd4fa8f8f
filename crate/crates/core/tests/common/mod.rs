//! Oracles shared by several test targets.
#![allow(dead_code)]

use gridrisk::gnn::*;
use gridrisk::grid::{fixtures, PowerGrid, PtdfMatrix};
use gridrisk::lp::{solve_lp, LinearProgram, VarId};
use gridrisk::scuc::{bus_shed_penalty, ScucConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dispatch cost of a fixed commitment pattern, formulated from scratch.
/// Returns `None` if the pattern breaks minimum up/down times.
pub fn pattern_cost(
    grid: &PowerGrid,
    ptdf: &PtdfMatrix,
    load: &[Vec<f64>],
    wind: &[Vec<f64>],
    u: &[Vec<bool>],
    cfg: &ScucConfig,
) -> Option<f64> {
    let units = grid.thermal_units();
    let horizon = load.len();
    let nb = grid.num_buses();
    let mut fixed_cost = 0.0;
    let mut start = vec![vec![false; horizon]; units.len()];
    let mut stop = vec![vec![false; horizon]; units.len()];
    for (k, &gi) in units.iter().enumerate() {
        let g = &grid.generators[gi];
        let mut prev = true;
        for t in 0..horizon {
            let on = u[k][t];
            start[k][t] = on && !prev;
            stop[k][t] = !on && prev;
            if start[k][t] && (t..(t + g.min_up).min(horizon)).any(|s| !u[k][s]) {
                return None;
            }
            if stop[k][t] && (t..(t + g.min_down).min(horizon)).any(|s| u[k][s]) {
                return None;
            }
            fixed_cost += if on { g.cost_noload } else { 0.0 };
            fixed_cost += if start[k][t] { g.startup_cost } else { 0.0 };
            fixed_cost += if stop[k][t] { g.shutdown_cost } else { 0.0 };
            prev = on;
        }
    }

    let mut lp = LinearProgram::new();
    let mut p = vec![vec![VarId(0); horizon]; units.len()];
    for (k, &gi) in units.iter().enumerate() {
        let g = &grid.generators[gi];
        for t in 0..horizon {
            let (lo, hi) = if u[k][t] { (g.p_min, g.p_max) } else { (0.0, 0.0) };
            p[k][t] = lp.add_var(g.cost_linear, lo, hi);
        }
    }
    let mut shed = vec![vec![None; nb]; horizon];
    let mut curt = vec![vec![None; nb]; horizon];
    for t in 0..horizon {
        for b in 0..nb {
            if load[t][b] > 0.0 {
                shed[t][b] = Some(lp.add_var(bus_shed_penalty(cfg, b, nb), 0.0, load[t][b]));
            }
            if wind[t][b] > 0.0 {
                curt[t][b] = Some(lp.add_var(0.0, 0.0, wind[t][b]));
            }
        }
    }
    for t in 0..horizon {
        let total: f64 = load[t].iter().sum::<f64>() - wind[t].iter().sum::<f64>();
        let mut row: Vec<(VarId, f64)> = p.iter().map(|r| (r[t], 1.0)).collect();
        for b in 0..nb {
            row.extend(shed[t][b].map(|s| (s, 1.0)));
            row.extend(curt[t][b].map(|c| (c, -1.0)));
        }
        lp.add_row(&row, total, total);

        let mut reserve = Vec::new();
        let mut cap = 0.0;
        for (k, &gi) in units.iter().enumerate() {
            if u[k][t] {
                cap += grid.generators[gi].p_max;
            }
            reserve.push((p[k][t], 1.0));
        }
        lp.add_row(&reserve, f64::NEG_INFINITY, cap - cfg.reserve_fraction * load[t].iter().sum::<f64>());

        for (k, &gi) in units.iter().enumerate() {
            let g = &grid.generators[gi];
            let up = g.ramp_rate + if start[k][t] { g.p_min } else { 0.0 };
            let down = g.ramp_rate + if stop[k][t] { g.p_min } else { 0.0 };
            if t == 0 {
                lp.add_row(&[(p[k][t], 1.0)], g.p_min - down, g.p_min + up);
            } else {
                lp.add_row(&[(p[k][t], 1.0), (p[k][t - 1], -1.0)], -down, up);
            }
        }

        for (q, br) in grid.branches.iter().enumerate() {
            let mut row = Vec::new();
            let mut constant = 0.0;
            for b in 0..nb {
                let a = ptdf.entries[[q, b]];
                constant += a * (wind[t][b] - load[t][b]);
                row.extend(shed[t][b].map(|s| (s, a)));
                row.extend(curt[t][b].map(|c| (c, -a)));
            }
            for (k, &gi) in units.iter().enumerate() {
                let b = grid.bus_index(grid.generators[gi].bus).unwrap();
                row.push((p[k][t], ptdf.entries[[q, b]]));
            }
            lp.add_row(&row, -br.flow_limit - constant, br.flow_limit - constant);
        }
    }
    solve_lp(&lp).ok().map(|s| s.objective + fixed_cost)
}

/// Minimum over every commitment pattern.
pub fn enumerate(grid: &PowerGrid, ptdf: &PtdfMatrix, load: &[Vec<f64>], wind: &[Vec<f64>], cfg: &ScucConfig) -> f64 {
    let g = grid.thermal_units().len();
    let horizon = load.len();
    let bits = g * horizon;
    assert!(bits <= 12);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << bits) {
        let u: Vec<Vec<bool>> =
            (0..g).map(|k| (0..horizon).map(|t| mask >> (k * horizon + t) & 1 == 1).collect()).collect();
        if let Some(c) = pattern_cost(grid, ptdf, load, wind, &u, cfg) {
            best = best.min(c);
        }
    }
    best
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// A normalized sample whose bounds are violated in places.
pub fn random_sample(graph: &GraphSpec, dims: Dims, rng: &mut ChaCha8Rng) -> NormalizedSample {
    let rows = graph.num_rows();
    let target = random_matrix(rows, dims.output, rng);
    let lower = target.mapv(|v| v - 0.3);
    let upper = target.mapv(|v| v + 0.2);
    NormalizedSample { x: random_matrix(graph.num_nodes(), dims.input, rng), target, lower, upper }
}

fn param(m: &mut SurrogateModel, k: usize, idx: usize) -> &mut f64 {
    let nw = m.layers[k].w.len();
    if idx < nw {
        &mut m.layers[k].w.as_slice_mut().unwrap()[idx]
    } else {
        &mut m.layers[k].b[idx - nw]
    }
}

/// ReLU and bound activity of every unit; finite differences are only
/// meaningful where this does not change.
fn kink_pattern(model: &SurrogateModel, graph: &GraphSpec, batch: &[&NormalizedSample]) -> Vec<bool> {
    let stack = |f: fn(&NormalizedSample) -> &Array2<f64>| {
        let views: Vec<_> = batch.iter().map(|s| f(s).view()).collect();
        ndarray::concatenate(ndarray::Axis(0), &views).unwrap()
    };
    let (x, lo, hi) = (stack(|s| &s.x), stack(|s| &s.lower), stack(|s| &s.upper));
    let cache = model.forward(graph, &x);
    let mut out: Vec<bool> = cache.pre[..5].iter().flat_map(|z| z.iter().map(|&v| v > 0.0)).collect();
    let pred = cache.output();
    out.extend(pred.iter().zip(&hi).map(|(p, h)| p > h));
    out.extend(pred.iter().zip(&lo).map(|(p, l)| p < l));
    out
}

/// Per-layer relative error of the analytic gradient against central
/// differences (h = 1e-4), skipping coordinates whose step crosses a kink.
pub struct GradientErrors {
    pub relative: Vec<f64>,
    pub skipped: usize,
    pub total: usize,
}

pub fn gradient_errors(head: Head, seed: u64) -> GradientErrors {
    let grid = fixtures::six_bus();
    let graph = GraphSpec::for_grid(&grid, head);
    let mut model = SurrogateModel::new(head, 4, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let samples: Vec<NormalizedSample> = (0..2).map(|_| random_sample(&graph, model.dims(), &mut rng)).collect();
    let batch: Vec<&NormalizedSample> = samples.iter().collect();
    let penalty = 0.5;
    let (_, grads) = batch_loss_and_gradients(&model, &graph, &batch, penalty);
    let h = 1e-4;
    let base = kink_pattern(&model, &graph, &batch);
    let (mut total, mut skipped) = (0usize, 0usize);
    let mut relative = Vec::new();
    for k in 0..model.layers.len() {
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for idx in 0..model.layers[k].w.len() + model.layers[k].b.len() {
            total += 1;
            let orig = *param(&mut model, k, idx);
            *param(&mut model, k, idx) = orig + h;
            let up = batch_loss(&model, &graph, &batch, penalty);
            let crossed_up = kink_pattern(&model, &graph, &batch) != base;
            *param(&mut model, k, idx) = orig - h;
            let down = batch_loss(&model, &graph, &batch, penalty);
            let crossed_down = kink_pattern(&model, &graph, &batch) != base;
            *param(&mut model, k, idx) = orig;
            if crossed_up || crossed_down {
                skipped += 1;
                continue;
            }
            let nw = model.layers[k].w.len();
            num.push((up - down) / (2.0 * h));
            let (r, c) = (idx / model.layers[k].w.ncols(), idx % model.layers[k].w.ncols());
            ana.push(if idx < nw { grads[k].w[[r, c]] } else { grads[k].b[idx - nw] });
        }
        let diff: f64 = num.iter().zip(&ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = ana.iter().map(|a| a * a).sum::<f64>().sqrt();
        relative.push(diff / norm.max(1e-12));
    }
    GradientErrors { relative, skipped, total }
}

/// Solves B θ = p with the slack angle pinned to zero, then returns
/// branch flows (θ_from − θ_to)/x in MW.
pub fn dc_flows(grid: &PowerGrid, p: &[f64]) -> Vec<f64> {
    let n = grid.num_buses();
    let slack = grid.bus_index(grid.slack_bus).unwrap();
    let mut a = vec![vec![0.0; n]; n];
    for br in &grid.branches {
        let f = grid.bus_index(br.from_bus).unwrap();
        let t = grid.bus_index(br.to_bus).unwrap();
        let y = 1.0 / br.reactance;
        a[f][f] += y;
        a[t][t] += y;
        a[f][t] -= y;
        a[t][f] -= y;
    }
    let mut b = p.to_vec();
    for j in 0..n {
        a[slack][j] = 0.0;
    }
    a[slack][slack] = 1.0;
    b[slack] = 0.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let theta: Vec<f64> = (0..n).map(|i| b[i] / a[i][i]).collect();
    grid.branches
        .iter()
        .map(|br| {
            let f = grid.bus_index(br.from_bus).unwrap();
            let t = grid.bus_index(br.to_bus).unwrap();
            (theta[f] - theta[t]) / br.reactance
        })
        .collect()
}
