//! Zonal load and wind scenarios over a planning horizon.
//!
//! Column layout of the zonal array: for zone position `z`, column `2z` is
//! load (MW) and column `2z + 1` is wind power (MW).

pub mod dist;
mod io;
pub mod sampler;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PowerGrid;

pub use dist::{normal_cdf, normal_quantile, MarginalSpec};
pub use io::{read_scenarios_csv, write_scenarios_csv};
pub use sampler::{
    apply_lhs_first_step, cholesky, lhs_first_step, lhs_uniform, sample_correlated, CorrelatedSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindCurve {
    pub v_min: f64,
    pub v_max: f64,
    /// Rated output per turbine (MW).
    pub p_rated: f64,
}

impl Default for WindCurve {
    fn default() -> Self {
        Self { v_min: 1.0, v_max: 15.0, p_rated: 100.0 }
    }
}

/// Cubic power curve between cut-in and rated speed, clamped to `[0, P_r]`.
pub fn wind_power(v: f64, curve: &WindCurve) -> f64 {
    let (a, b) = (curve.v_min.powi(3), curve.v_max.powi(3));
    (curve.p_rated * (v.powi(3) - a) / (b - a)).clamp(0.0, curve.p_rated)
}

/// Splits zonal values onto buses: `out[b] = factors[b] * zonal[zone_of[b]]`.
/// Factors of a zone must sum to one unless the zone carries nothing.
pub fn disaggregate(zonal: &[f64], zone_of: &[usize], factors: &[f64]) -> Result<Vec<f64>> {
    if zone_of.len() != factors.len() {
        return Err(Error::Dimension(format!("{} buses but {} factors", zone_of.len(), factors.len())));
    }
    let mut sums = vec![0.0; zonal.len()];
    for (&z, &f) in zone_of.iter().zip(factors) {
        if z >= zonal.len() {
            return Err(Error::Dimension(format!("zone position {z} outside {} zones", zonal.len())));
        }
        if f < 0.0 {
            return Err(Error::FactorSum { zone: z, sum: f });
        }
        sums[z] += f;
    }
    for (z, (&s, &v)) in sums.iter().zip(zonal).enumerate() {
        let empty = s == 0.0 && v == 0.0;
        if !empty && (s - 1.0).abs() > 1e-9 {
            return Err(Error::FactorSum { zone: z, sum: s });
        }
    }
    Ok(zone_of.iter().zip(factors).map(|(&z, &f)| f * zonal[z]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneMarginals {
    /// Aggregate zonal load (MW).
    pub load: MarginalSpec,
    /// Wind speed (m/s), converted to power through the wind curve.
    pub wind: MarginalSpec,
}

impl ZoneMarginals {
    /// Per-zone load and wind-speed parameters of a 118-bus, three-zone
    /// study; zones beyond the third reuse the table cyclically.
    pub fn reference_table(zones: usize) -> Vec<ZoneMarginals> {
        let table = [
            (50.0, 15.0, 10.0, 90.0, 2.0, 8.0),
            (75.0, 20.0, 25.0, 125.0, 1.8, 8.2),
            (100.0, 15.0, 60.0, 140.0, 2.2, 7.8),
        ];
        (0..zones)
            .map(|z| {
                let (mu, sigma, a, b, k, lambda) = table[z % table.len()];
                ZoneMarginals {
                    load: MarginalSpec::TruncatedNormal { mu, sigma, a, b },
                    wind: MarginalSpec::Weibull { k, lambda },
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub zones: Vec<ZoneMarginals>,
    /// Full `2Z × 2Z` correlation matrix; `None` uses [`default_covariance`].
    pub covariance: Option<Vec<Vec<f64>>>,
    pub adjacent_correlation: f64,
    pub curve: WindCurve,
    pub lhs_first_step: bool,
}

impl ScenarioConfig {
    pub fn for_grid(grid: &PowerGrid) -> Self {
        Self {
            zones: ZoneMarginals::reference_table(grid.num_zones()),
            covariance: None,
            adjacent_correlation: 0.3,
            curve: WindCurve::default(),
            lhs_first_step: true,
        }
    }

    pub fn marginals(&self) -> Vec<MarginalSpec> {
        self.zones.iter().flat_map(|z| [z.load, z.wind]).collect()
    }

    pub fn covariance_matrix(&self, grid: &PowerGrid) -> Result<Array2<f64>> {
        match &self.covariance {
            None => Ok(default_covariance(grid, self.adjacent_correlation)),
            Some(rows) => {
                let m = rows.len();
                if rows.iter().any(|r| r.len() != m) {
                    return Err(Error::Dimension("covariance rows have unequal length".into()));
                }
                let c = Array2::from_shape_fn((m, m), |(i, j)| rows[i][j]);
                if (0..m).any(|i| (c[[i, i]] - 1.0).abs() > 1e-12) {
                    return Err(Error::InvalidParameter("covariance must have a unit diagonal".into()));
                }
                Ok(c)
            }
        }
    }
}

/// Unit diagonal, `rho` between same-type variables (load-load, wind-wind)
/// of zones joined by a branch, zero elsewhere.
pub fn default_covariance(grid: &PowerGrid, rho: f64) -> Array2<f64> {
    let z = grid.num_zones();
    let mut c = Array2::eye(2 * z);
    for a in 0..z {
        for b in 0..z {
            if a != b && grid.zones_adjacent(a, b) {
                c[[2 * a, 2 * b]] = rho;
                c[[2 * a + 1, 2 * b + 1]] = rho;
            }
        }
    }
    c
}

/// `N` scenarios of zonal load and wind over `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub n: usize,
    pub horizon: usize,
    pub zone_ids: Vec<usize>,
    pub zone_names: Vec<String>,
    pub seed: u64,
    /// `N × T × 2Z` MW values, index `(n * T + t) * 2Z + col`.
    pub zonal: Vec<f64>,
    /// `N × T × Z` wind speeds (m/s).
    pub speeds: Vec<f64>,
    pub config_hash: Option<String>,
}

/// Bus-level series of one scenario, `T × |V|` each.
#[derive(Debug, Clone, PartialEq)]
pub struct BusProfile {
    pub load: Vec<Vec<f64>>,
    pub wind: Vec<Vec<f64>>,
}

impl ScenarioSet {
    pub fn num_zones(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn m(&self) -> usize {
        2 * self.num_zones()
    }

    pub fn load(&self, n: usize, t: usize, z: usize) -> f64 {
        self.zonal[(n * self.horizon + t) * self.m() + 2 * z]
    }

    pub fn wind(&self, n: usize, t: usize, z: usize) -> f64 {
        self.zonal[(n * self.horizon + t) * self.m() + 2 * z + 1]
    }

    pub fn speed(&self, n: usize, t: usize, z: usize) -> f64 {
        self.speeds[(n * self.horizon + t) * self.num_zones() + z]
    }

    pub fn total_load(&self, n: usize, t: usize) -> f64 {
        (0..self.num_zones()).map(|z| self.load(n, t, z)).sum()
    }

    pub fn check_grid(&self, grid: &PowerGrid) -> Result<()> {
        let ids: Vec<usize> = grid.zones.iter().map(|z| z.id).collect();
        if ids != self.zone_ids {
            return Err(Error::ConfigMismatch(format!(
                "scenario zones {:?} do not match grid zones {:?}",
                self.zone_ids, ids
            )));
        }
        Ok(())
    }

    /// Disaggregates scenario `n` onto buses using base-load and
    /// wind-capacity shares.
    pub fn bus_profile(&self, grid: &PowerGrid, n: usize) -> Result<BusProfile> {
        self.check_grid(grid)?;
        let zone_of = grid.bus_zone_indices();
        let (lf, wf) = (grid.load_factors(), grid.wind_factors());
        let z = self.num_zones();
        let mut load = Vec::with_capacity(self.horizon);
        let mut wind = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let zl: Vec<f64> = (0..z).map(|k| self.load(n, t, k)).collect();
            let zw: Vec<f64> = (0..z).map(|k| self.wind(n, t, k)).collect();
            load.push(disaggregate(&zl, &zone_of, &lf)?);
            wind.push(disaggregate(&zw, &zone_of, &wf)?);
        }
        Ok(BusProfile { load, wind })
    }

    /// Copy restricted to the given scenario indices.
    pub fn subset(&self, idx: &[usize]) -> ScenarioSet {
        let (a, b) = (self.horizon * self.m(), self.horizon * self.num_zones());
        let mut out = self.clone();
        out.n = idx.len();
        out.zonal = idx.iter().flat_map(|&i| self.zonal[i * a..(i + 1) * a].iter().copied()).collect();
        out.speeds = idx.iter().flat_map(|&i| self.speeds[i * b..(i + 1) * b].iter().copied()).collect();
        out
    }
}

/// Samples zonal scenarios for `grid`. Returns the set and the raw sampler
/// output (latent Gaussians, uniforms, marginal draws) for diagnostics.
pub fn generate_scenarios(
    grid: &PowerGrid,
    cfg: &ScenarioConfig,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<(ScenarioSet, CorrelatedSample)> {
    let z = grid.num_zones();
    if cfg.zones.len() != z {
        return Err(Error::ConfigMismatch(format!("{} zone marginals for {} zones", cfg.zones.len(), z)));
    }
    let marginals = cfg.marginals();
    let c = cfg.covariance_matrix(grid)?;
    let mut sample = sample_correlated(n, horizon, &marginals, &c, seed)?;
    if cfg.lhs_first_step {
        apply_lhs_first_step(&mut sample, &marginals, seed);
    }
    let turbines = grid.wind_units_per_zone();
    let m = 2 * z;
    let mut zonal = vec![0.0; n * horizon * m];
    let mut speeds = vec![0.0; n * horizon * z];
    for i in 0..n {
        for t in 0..horizon {
            for k in 0..z {
                let at = sample.idx(i, t, 2 * k);
                let v = sample.values[at + 1];
                zonal[at] = sample.values[at];
                zonal[at + 1] = turbines[k] as f64 * wind_power(v, &cfg.curve);
                speeds[(i * horizon + t) * z + k] = v;
            }
        }
    }
    let set = ScenarioSet {
        n,
        horizon,
        zone_ids: grid.zones.iter().map(|z| z.id).collect(),
        zone_names: grid.zones.iter().map(|z| z.name.clone()).collect(),
        seed,
        zonal,
        speeds,
        config_hash: None,
    };
    Ok((set, sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures;

    #[test]
    fn wind_curve_points() {
        let c = WindCurve::default();
        assert_eq!(wind_power(1.0, &c), 0.0);
        assert_eq!(wind_power(15.0, &c), 100.0);
        assert!((wind_power(8.0, &c) - 15.145_228_215_767_634).abs() < 1e-9);
        assert_eq!(wind_power(0.5, &c), 0.0);
        assert_eq!(wind_power(30.0, &c), 100.0);
    }

    #[test]
    fn disaggregate_examples() {
        let out = disaggregate(&[90.0], &[0, 0, 0], &[1.0 / 3.0; 3]).unwrap();
        for v in out {
            assert!((v - 30.0).abs() < 1e-12);
        }
        assert_eq!(disaggregate(&[42.0], &[0], &[1.0]).unwrap(), vec![42.0]);
        assert!(matches!(
            disaggregate(&[10.0, 5.0], &[0, 1], &[1.0, 0.5]),
            Err(Error::FactorSum { zone: 1, .. })
        ));
    }

    #[test]
    fn default_covariance_is_pd() {
        let g = fixtures::six_bus();
        let c = default_covariance(&g, 0.3);
        assert!(cholesky(&c).is_ok());
        assert_eq!(c[[0, 2]], 0.3);
        assert_eq!(c[[0, 4]], 0.0);
        assert_eq!(c[[0, 1]], 0.0);
    }

    #[test]
    fn fixture_profiles_conserve_zonal_totals() {
        let g = fixtures::six_bus();
        let (set, _) = generate_scenarios(&g, &ScenarioConfig::for_grid(&g), 5, 3, 9).unwrap();
        let zone_of = g.bus_zone_indices();
        for n in 0..5 {
            let p = set.bus_profile(&g, n).unwrap();
            for t in 0..3 {
                for z in 0..3 {
                    let l: f64 = (0..6).filter(|&b| zone_of[b] == z).map(|b| p.load[t][b]).sum();
                    let w: f64 = (0..6).filter(|&b| zone_of[b] == z).map(|b| p.wind[t][b]).sum();
                    assert!((l - set.load(n, t, z)).abs() <= 1e-9);
                    assert!((w - set.wind(n, t, z)).abs() <= 1e-9);
                }
            }
        }
    }
}
