//! Correlated sampling: Gaussian random walk per column, spatial mixing with
//! the Cholesky factor of `C`, then the Gaussian copula into the marginals.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dist::{normal_cdf, MarginalSpec};
use crate::error::{Error, Result};

/// Stream id reserved for the Latin hypercube draws.
const LHS_STREAM: u64 = u64::MAX;

/// Generator for scenario `index` under `seed`. Every scenario owns a
/// separate ChaCha8 stream, so results do not depend on evaluation order.
pub fn scenario_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Lower-triangular `L` with `L Lᵀ = c`.
pub fn cholesky(c: &Array2<f64>) -> Result<Array2<f64>> {
    let m = c.nrows();
    if c.ncols() != m {
        return Err(Error::Dimension(format!("covariance is {}x{}", m, c.ncols())));
    }
    for i in 0..m {
        for j in 0..i {
            if (c[[i, j]] - c[[j, i]]).abs() > 1e-12 * (1.0 + c[[i, j]].abs()) {
                return Err(Error::InvalidParameter(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((m, m));
    for j in 0..m {
        let mut d = c[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..m {
            let mut s = c[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Output of [`sample_correlated`]. Every array is `N × T × M`, stored with
/// index `(n * T + t) * M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedSample {
    pub n: usize,
    pub horizon: usize,
    pub m: usize,
    /// Spatially mixed latent Gaussians `xᶜ`.
    pub latent: Vec<f64>,
    /// `Φ(xᶜ)`
    pub uniform: Vec<f64>,
    /// Marginal draws `Φ_W⁻¹(u)`.
    pub values: Vec<f64>,
}

impl CorrelatedSample {
    pub fn idx(&self, n: usize, t: usize, m: usize) -> usize {
        (n * self.horizon + t) * self.m + m
    }
}

pub fn sample_correlated(
    n: usize,
    horizon: usize,
    marginals: &[MarginalSpec],
    c: &Array2<f64>,
    seed: u64,
) -> Result<CorrelatedSample> {
    let m = marginals.len();
    if n == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("N and T must be at least 1".into()));
    }
    if c.nrows() != m {
        return Err(Error::Dimension(format!("{} marginals but covariance is {}x{}", m, c.nrows(), c.ncols())));
    }
    for spec in marginals {
        spec.validate()?;
    }
    let l = cholesky(c)?;

    let len = n * horizon * m;
    let mut latent = vec![0.0; len];
    let mut uniform = vec![0.0; len];
    let mut values = vec![0.0; len];
    let mut x = vec![0.0; m];
    let mut s = vec![0.0; m];
    for i in 0..n {
        let mut rng = scenario_rng(seed, i as u64);
        x.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..horizon {
            let scale = ((t + 1) as f64).sqrt();
            for j in 0..m {
                let e: f64 = rng.sample(StandardNormal);
                x[j] += e;
                s[j] = x[j] / scale;
            }
            for r in 0..m {
                let mut xc = 0.0;
                for k in 0..=r {
                    xc += l[[r, k]] * s[k];
                }
                let at = (i * horizon + t) * m + r;
                latent[at] = xc;
                uniform[at] = normal_cdf(xc);
                values[at] = marginals[r].quantile(uniform[at]);
            }
        }
    }
    Ok(CorrelatedSample { n, horizon, m, latent, uniform, values })
}

/// Stratified uniforms, `N × M` row-major: column `j` holds exactly one
/// value in each `[k/N, (k+1)/N)`, in random order.
pub fn lhs_uniform(n: usize, m: usize, seed: u64) -> Vec<f64> {
    let mut rng = scenario_rng(seed, LHS_STREAM);
    let mut out = vec![0.0; n * m];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..m {
        // Fisher-Yates, spelled out so the draw order is fixed here.
        for k in (1..n).rev() {
            let r = rng.random_range(0..=k);
            perm.swap(k, r);
        }
        for (row, &stratum) in perm.iter().enumerate() {
            let jitter: f64 = rng.random();
            out[row * m + j] = (stratum as f64 + jitter) / n as f64;
        }
    }
    out
}

/// Latin hypercube sample of the marginals, `N × M` row-major.
pub fn lhs_first_step(n: usize, marginals: &[MarginalSpec], seed: u64) -> Result<Vec<f64>> {
    for spec in marginals {
        spec.validate()?;
    }
    let m = marginals.len();
    let mut u = lhs_uniform(n, m, seed);
    for row in 0..n {
        for j in 0..m {
            u[row * m + j] = marginals[j].quantile(u[row * m + j]);
        }
    }
    Ok(u)
}

/// Replaces the first step of `sample` by a Latin hypercube sample, giving
/// the k-th smallest stratified value of a column to the scenario whose
/// first-step uniform has rank k in that column.
pub fn apply_lhs_first_step(sample: &mut CorrelatedSample, marginals: &[MarginalSpec], seed: u64) {
    let (n, m) = (sample.n, sample.m);
    let lhs = lhs_uniform(n, m, seed);
    for j in 0..m {
        let mut strat: Vec<f64> = (0..n).map(|row| lhs[row * m + j]).collect();
        strat.sort_by(f64::total_cmp);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            sample.uniform[sample.idx(a, 0, j)]
                .total_cmp(&sample.uniform[sample.idx(b, 0, j)])
                .then(a.cmp(&b))
        });
        for (rank, &scen) in order.iter().enumerate() {
            let at = sample.idx(scen, 0, j);
            sample.uniform[at] = strat[rank];
            sample.values[at] = marginals[j].quantile(strat[rank]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_factor() {
        let l = cholesky(&Array2::eye(4)).unwrap();
        assert_eq!(l, Array2::<f64>::eye(4));
    }

    #[test]
    fn two_by_two_closed_form() {
        let l = cholesky(&array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert!((l[[1, 0]] - 0.5).abs() < 1e-15);
        assert!((l[[1, 1]] - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(l[[0, 1]], 0.0);
    }

    #[test]
    fn indefinite_names_pivot() {
        match cholesky(&array![[1.0, 2.0], [2.0, 1.0]]) {
            Err(Error::NotPositiveDefinite { pivot: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lhs_quartiles() {
        let u = lhs_uniform(4, 1, 3);
        let mut strata: Vec<usize> = u.iter().map(|v| (v * 4.0).floor() as usize).collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }
}
