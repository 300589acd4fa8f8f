//! Surrogate network checks against scalar re-implementations and finite
//! differences.

use gridrisk::gnn::*;
use gridrisk::grid::fixtures;
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{gradient_errors, random_matrix, random_sample};

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Plain-loop forward pass of one sample, returning output rows.
fn scalar_forward(model: &SurrogateModel, graph: &GraphSpec, x: &Array2<f64>) -> Vec<Vec<f64>> {
    let dense = |layer: &Dense, h: &[f64], act: bool| -> Vec<f64> {
        (0..layer.w.nrows())
            .map(|o| {
                let mut z = layer.b[o];
                for (i, hv) in h.iter().enumerate() {
                    z += layer.w[[o, i]] * hv;
                }
                if act {
                    relu(z)
                } else {
                    z
                }
            })
            .collect()
    };
    let v = graph.num_nodes();
    let mut h: Vec<Vec<f64>> = (0..v).map(|u| x.row(u).to_vec()).collect();
    for (k, layer) in model.layers.iter().enumerate() {
        if k == 4 && !graph.pools.is_empty() {
            h = graph
                .pools
                .iter()
                .map(|p| (0..h[0].len()).map(|j| p.iter().map(|&u| h[u][j]).sum::<f64>() / p.len() as f64).collect())
                .collect();
        }
        h = if k == 2 || k == 3 {
            (0..v)
                .map(|u| {
                    let nb = &graph.adjacency[u];
                    let mut m = h[u].clone();
                    for j in 0..h[u].len() {
                        let mean = if nb.is_empty() { 0.0 } else { nb.iter().map(|&w| h[w][j]).sum::<f64>() / nb.len() as f64 };
                        m.push(mean);
                    }
                    dense(layer, &m, true)
                })
                .collect()
        } else {
            h.iter().map(|row| dense(layer, row, k < 5)).collect()
        };
    }
    h
}

#[test]
fn forward_matches_scalar_oracle() {
    let grid = fixtures::six_bus();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for head in Head::ALL {
        let graph = GraphSpec::for_grid(&grid, head);
        let model = SurrogateModel::new(head, 5, 11);
        let x = random_matrix(6, model.dims().input, &mut rng);
        let cache = model.forward(&graph, &x);
        let fast = cache.output();
        let slow = scalar_forward(&model, &graph, &x);
        for (r, row) in slow.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                assert!((fast[[r, t]] - v).abs() <= 1e-10, "{head} row {r} t {t}");
            }
        }
    }
}

#[test]
fn sage_on_path_graph_by_hand() {
    let h = Array2::eye(3);
    let adjacency = vec![vec![1], vec![0, 2], vec![1]];
    let mut w = Array2::zeros((3, 6));
    for i in 0..3 {
        w[[i, i]] = 1.0;
        w[[i, i + 3]] = 1.0;
    }
    let out = sage_layer(&h, &adjacency, &Dense { w, b: Array1::zeros(3) });
    assert_eq!(out, array![[1.0, 1.0, 0.0], [0.5, 1.0, 0.5], [0.0, 1.0, 1.0]]);
}

#[test]
fn symmetric_pair_gets_identical_outputs() {
    let h = array![[0.3, -0.7], [0.3, -0.7]];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layer = Dense { w: random_matrix(3, 4, &mut rng), b: Array1::from(vec![0.1, 0.2, 0.3]) };
    let out = sage_layer(&h, &[vec![1], vec![0]], &layer);
    assert_eq!(out.row(0), out.row(1));
}

#[test]
fn zero_weights_give_zero_output() {
    let grid = fixtures::six_bus();
    for head in Head::ALL {
        let graph = GraphSpec::for_grid(&grid, head);
        let model = SurrogateModel::zeros(head, 3);
        let x = Array2::from_elem((6, model.dims().input), 2.5);
        let cache = model.forward(&graph, &x);
        assert!(cache.output().iter().all(|&v| v == 0.0));
    }
}

fn permuted(graph: &GraphSpec, perm: &[usize]) -> GraphSpec {
    // perm[new] = old
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    GraphSpec {
        adjacency: perm.iter().map(|&old| graph.adjacency[old].iter().map(|&w| inv[w]).collect()).collect(),
        pools: graph.pools.iter().map(|p| p.iter().map(|&u| inv[u]).collect()).collect(),
        row_names: graph.row_names.clone(),
    }
}

#[test]
fn node_order_does_not_matter() {
    let grid = fixtures::six_bus();
    let perm = [4, 2, 0, 5, 1, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for head in Head::ALL {
        let graph = GraphSpec::for_grid(&grid, head);
        let pg = permuted(&graph, &perm);
        let model = SurrogateModel::new(head, 4, 3);
        let x = random_matrix(6, model.dims().input, &mut rng);
        let px = Array2::from_shape_fn(x.dim(), |(i, j)| x[[perm[i], j]]);
        let a = model.forward(&graph, &x).output().clone();
        let b = model.forward(&pg, &px).output().clone();
        if head.is_graph_level() {
            assert!((&a - &b).iter().all(|d| d.abs() < 1e-12));
        } else {
            for (new, &old) in perm.iter().enumerate() {
                assert!((&a.row(old) - &b.row(new)).iter().all(|d| d.abs() < 1e-12));
            }
        }
    }
}

#[test]
fn loss_matches_scalar_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_matrix(4, 7, &mut rng);
    let y = random_matrix(4, 7, &mut rng);
    let lo = random_matrix(4, 7, &mut rng).mapv(|v| v - 0.5);
    let hi = lo.mapv(|v| v + 0.6);
    let w = 0.7;
    let mut mse = 0.0;
    let mut pen = 0.0;
    for i in 0..4 {
        for j in 0..7 {
            mse += (p[[i, j]] - y[[i, j]]).powi(2);
            pen += (p[[i, j]] - hi[[i, j]]).max(0.0).powi(2) + (lo[[i, j]] - p[[i, j]]).max(0.0).powi(2);
        }
    }
    let expected = mse / 28.0 + w * pen / 28.0;
    assert!((loss(&p, &y, &lo, &hi, w) - expected).abs() <= 1e-12);
    assert_eq!(loss(&y, &y, &y.mapv(|v| v - 1.0), &y.mapv(|v| v + 1.0), w), 0.0);
}

fn gradient_check(head: Head, seed: u64) {
    let r = gradient_errors(head, seed);
    for (k, rel) in r.relative.iter().enumerate() {
        assert!(*rel <= 1e-4, "{head} {}: relative error {rel:e}", LAYER_NAMES[k]);
    }
    assert!(r.skipped * 50 <= r.total, "{} of {} parameters sit on a kink", r.skipped, r.total);
}

#[test]
fn gradients_match_finite_differences_generation() {
    gradient_check(Head::Generation, 1);
}

#[test]
fn gradients_match_finite_differences_shedding() {
    gradient_check(Head::Shedding, 2);
}

#[test]
fn gradients_match_finite_differences_branch_flow() {
    gradient_check(Head::BranchFlow, 3);
}

#[test]
fn zero_loss_point_has_zero_gradient() {
    let grid = fixtures::six_bus();
    let graph = GraphSpec::for_grid(&grid, Head::Generation);
    let model = SurrogateModel::new(Head::Generation, 3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(6, model.dims().input, &mut rng);
    let pred = model.forward(&graph, &x).output().clone();
    let s = NormalizedSample { x, target: pred.clone(), lower: pred.mapv(|v| v - 1.0), upper: pred.mapv(|v| v + 1.0) };
    let (l, grads) = batch_loss_and_gradients(&model, &graph, &[&s], 1.0);
    assert_eq!(l, 0.0);
    assert!(grads.iter().all(|g| g.w.iter().chain(&g.b).all(|&v| v == 0.0)));
}

#[test]
fn dead_units_pass_no_gradient() {
    let grid = fixtures::six_bus();
    let graph = GraphSpec::for_grid(&grid, Head::Shedding);
    let mut model = SurrogateModel::new(Head::Shedding, 3, 6);
    model.layers[4].b.fill(-1e6);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = random_sample(&graph, model.dims(), &mut rng);
    let (_, grads) = batch_loss_and_gradients(&model, &graph, &[&s], 1.0);
    for g in &grads[..5] {
        assert!(g.w.iter().chain(&g.b).all(|&v| v == 0.0));
    }
    assert!(grads[5].w.iter().all(|&v| v == 0.0));
    assert!(grads[5].b.iter().any(|&v| v != 0.0));
}

/// Ten samples whose zonal targets are linear in the node loads.
fn toy_dataset() -> Dataset {
    let grid = fixtures::six_bus();
    let graph = GraphSpec::for_grid(&grid, Head::Generation);
    let horizon = 3;
    let statics = static_features(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples = (0..10)
        .map(|n| {
            let load: Vec<Vec<f64>> = (0..horizon).map(|_| (0..6).map(|_| rng.random_range(10.0..50.0)).collect()).collect();
            let profile = gridrisk::scenario::BusProfile { load: load.clone(), wind: vec![vec![0.0; 6]; horizon] };
            let mut target = Array2::zeros((graph.num_rows(), horizon));
            for (k, pool) in graph.pools.iter().enumerate() {
                for t in 0..horizon {
                    target[[k, t]] = pool.iter().map(|&b| 0.8 * load[t][b]).sum();
                }
            }
            GraphSample {
                scenario: n,
                features: node_features(&statics, &profile),
                lower: Array2::zeros(target.dim()),
                upper: target.mapv(|v| 2.0 * v),
                target,
            }
        })
        .collect();
    Dataset { head: Head::Generation, horizon, graph, samples }
}

#[test]
fn toy_regression_converges() {
    let ds = toy_dataset();
    let cfg = TrainConfig { split: [1.0, 0.0, 0.0], epochs: 200, patience: 1000, batch_size: 4, ..TrainConfig::default() };
    let (_, report) = train(&ds, &cfg).unwrap();
    let first = report.epochs[0].train_loss;
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last <= 0.1 * first, "loss {first} -> {last}");
}

#[test]
fn training_is_deterministic() {
    let ds = toy_dataset();
    let cfg = TrainConfig { split: [0.6, 0.2, 0.2], epochs: 20, batch_size: 3, ..TrainConfig::default() };
    let (a, ra) = train(&ds, &cfg).unwrap();
    let (b, rb) = train(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn predictions_respect_bounds_and_flow_consistency() {
    let grid = fixtures::six_bus();
    let ptdf = gridrisk::grid::compute_ptdf(&grid).unwrap();
    let graph = GraphSpec::for_grid(&grid, Head::BranchFlow);
    let model = SurrogateModel::zeros(Head::BranchFlow, 2);
    let x = Array2::zeros((6, model.dims().input));
    let lower = Array2::from_elem((6, 2), -5.0);
    let upper = Array2::from_elem((6, 2), 5.0);
    let flows = predict_branch_flows(&model, &graph, &x, &lower, &upper, &ptdf).unwrap();
    assert!(flows.iter().all(|&f| f == 0.0));

    let inj = array![[30.0, 10.0], [0.0, -4.0], [-10.0, 0.0], [-20.0, -6.0], [0.0, 0.0], [0.0, 0.0]];
    let f = injections_to_flows(&inj, &ptdf);
    let direct = ptdf.flows(&inj.column(0).to_vec());
    for q in 0..grid.num_branches() {
        assert!((f[[0, q]] - direct[q]).abs() < 1e-9);
    }
}

#[test]
fn relative_error_closed_forms() {
    let truth = vec![array![[100.0, 50.0]], array![[20.0, 0.0]]];
    assert!(mean_relative_error(&truth, &truth, MRE_FLOOR).iter().all(|&v| v == 0.0));
    let pred: Vec<_> = truth.iter().map(|y| y * 1.1).collect();
    let e = mean_relative_error(&pred, &truth, MRE_FLOOR);
    assert!((e[[0, 0]] - 10.0).abs() < 1e-9);
    // The zero target is measured against the 1 MW floor.
    assert!((e[[0, 1]] - 5.0).abs() < 1e-9);
}

#[test]
fn checkpoint_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let model = SurrogateModel::new(Head::Generation, 12, 3);
    write_checkpoint(&model, &path).unwrap();
    assert_eq!(read_checkpoint(&path).unwrap(), model);
    std::fs::write(&path, b"nonsense").unwrap();
    assert!(read_checkpoint(&path).is_err());
}
