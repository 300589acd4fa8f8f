//! Simplex results against brute-force vertex enumeration.

use gridrisk::lp::{solve_lp, LinearProgram, VarId};
use gridrisk::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `a x = b` for square `a` by Gaussian elimination; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
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
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of `c'x` over `{x : g x <= h}` by enumerating all vertices.
fn vertex_oracle(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<f64> {
    let n = c.len();
    let k = g.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| g[i].clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = g
                .iter()
                .zip(h)
                .all(|(row, &hi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= hi + 1e-7);
            if feasible {
                let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(obj, |b| b.min(obj)));
            }
        }
        // Next combination.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn maximize_single_bound() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
    lp.add_row(&[(x, 1.0)], f64::NEG_INFINITY, 3.0);
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.x[0] - 3.0).abs() < 1e-12);
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 20 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=4);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut lp = LinearProgram::new();
        let vars: Vec<VarId> = (0..n)
            .map(|j| {
                let lo = rng.random_range(-3.0..0.0);
                let hi = rng.random_range(1.0..4.0);
                lp.add_var(c[j], lo, hi)
            })
            .collect();
        let mut g = Vec::new();
        let mut h = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            g.push(e.clone());
            h.push(lp.upper[j]);
            e[j] = -1.0;
            g.push(e);
            h.push(-lp.lower[j]);
        }
        for _ in 0..m {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lo = rng.random_range(-4.0..0.5);
            let hi = lo + rng.random_range(0.5..6.0);
            let coeffs: Vec<(VarId, f64)> = vars.iter().copied().zip(a.iter().copied()).collect();
            lp.add_row(&coeffs, lo, hi);
            g.push(a.clone());
            h.push(hi);
            g.push(a.iter().map(|v| -v).collect());
            h.push(-lo);
        }
        let oracle = vertex_oracle(&c, &g, &h);
        match (solve_lp(&lp), oracle) {
            (Ok(sol), Some(best)) => {
                assert!(lp.max_violation(&sol.x) < 1e-7);
                assert!(
                    (sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                    "simplex {} vs vertices {}",
                    sol.objective,
                    best
                );
                checked += 1;
            }
            (Err(Error::Infeasible), None) => {}
            (res, oracle) => panic!("disagreement: {:?} vs {:?}", res.map(|s| s.objective), oracle),
        }
    }
}

#[test]
fn degenerate_lp_terminates() {
    // Beale's classic cycling example for Dantzig's rule without safeguards.
    let mut lp = LinearProgram::new();
    let x: Vec<VarId> = [-0.75, 150.0, -0.02, 6.0]
        .iter()
        .map(|&c| lp.add_var(c, 0.0, f64::INFINITY))
        .collect();
    lp.add_row(&[(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)], f64::NEG_INFINITY, 0.0);
    lp.add_row(&[(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)], f64::NEG_INFINITY, 0.0);
    lp.add_row(&[(x[2], 1.0)], f64::NEG_INFINITY, 1.0);
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.objective + 0.05).abs() < 1e-9);
}

#[test]
fn highly_degenerate_assignment_terminates() {
    // 4x4 assignment polytope: every vertex is heavily degenerate.
    let mut lp = LinearProgram::new();
    let n = 4;
    let mut v = vec![];
    for i in 0..n {
        for j in 0..n {
            v.push(lp.add_var(((i * 7 + j * 3) % 5) as f64 - 2.0, 0.0, f64::INFINITY));
        }
    }
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (v[i * n + j], 1.0)).collect();
        lp.add_row(&row, 1.0, 1.0);
        let col: Vec<_> = (0..n).map(|j| (v[j * n + i], 1.0)).collect();
        lp.add_row(&col, 1.0, 1.0);
    }
    let sol = solve_lp(&lp).unwrap();
    // Brute force over permutations.
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..n).collect();
    permutohedron_min(&mut perm, 0, &lp, n, &mut best);
    assert!((sol.objective - best).abs() < 1e-9);
}

fn permutohedron_min(p: &mut Vec<usize>, k: usize, lp: &LinearProgram, n: usize, best: &mut f64) {
    if k == n {
        let cost: f64 = (0..n).map(|i| lp.cost[i * n + p[i]]).sum();
        *best = best.min(cost);
        return;
    }
    for i in k..n {
        p.swap(k, i);
        permutohedron_min(p, k + 1, lp, n, best);
        p.swap(k, i);
    }
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var(1.0, 0.0, f64::INFINITY);
    let y = lp.add_var(1.0, 0.0, f64::INFINITY);
    lp.add_row(&[(x, 1.0), (y, 1.0)], f64::NEG_INFINITY, 1.0);
    lp.add_row(&[(x, 1.0), (y, 1.0)], 2.0, f64::INFINITY);
    assert!(matches!(solve_lp(&lp), Err(Error::Infeasible)));

    let mut lp = LinearProgram::new();
    let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
    let y = lp.add_var(0.0, 0.0, f64::INFINITY);
    lp.add_row(&[(x, 1.0), (y, -1.0)], f64::NEG_INFINITY, 1.0);
    assert!(matches!(solve_lp(&lp), Err(Error::Unbounded)));
}
