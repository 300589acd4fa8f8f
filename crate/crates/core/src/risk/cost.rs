use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal consequence cost in $/MW as a function of the shed or
/// overloaded amount. Costs are integrals of this curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostCurve {
    Constant { rate: f64 },
    /// Step rates: `rates[k]` applies from `from[k]` up to `from[k + 1]`.
    /// `from[0]` must be 0.
    Table { from: Vec<f64>, rates: Vec<f64> },
}

impl CostCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostCurve::Constant { rate } if *rate >= 0.0 && rate.is_finite() => Ok(()),
            CostCurve::Constant { rate } => Err(Error::InvalidParameter(format!("cost rate {rate} must be >= 0"))),
            CostCurve::Table { from, rates } => {
                let ok = !from.is_empty()
                    && from.len() == rates.len()
                    && from[0] == 0.0
                    && from.windows(2).all(|w| w[0] < w[1])
                    && rates.iter().all(|r| *r >= 0.0 && r.is_finite());
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "cost table needs increasing breakpoints from 0 and one nonnegative rate each".into(),
                    ))
                }
            }
        }
    }

    /// Exact `∫₀^x C(s) ds` for `x >= 0`; negative `x` costs nothing.
    pub fn integral(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self {
            CostCurve::Constant { rate } => rate * x,
            CostCurve::Table { from, rates } => {
                let mut total = 0.0;
                for k in 0..from.len() {
                    let lo = from[k];
                    if x <= lo {
                        break;
                    }
                    let hi = from.get(k + 1).copied().unwrap_or(f64::INFINITY).min(x);
                    total += rates[k] * (hi - lo);
                }
                total
            }
        }
    }
}

/// Shedding consequence `R_s = ∫₀^ψ C_s`.
pub fn shed_cost(psi: f64, curve: &CostCurve) -> f64 {
    curve.integral(psi)
}

/// Overloading consequence: the cost of the flow magnitude above
/// `epsilon · limit`, zero below it.
pub fn overload_cost(flow: f64, limit: f64, epsilon: f64, curve: &CostCurve) -> f64 {
    curve.integral(flow.abs() - epsilon * limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_closed_form() {
        let c = CostCurve::Constant { rate: 10.0 };
        assert_eq!(shed_cost(7.0, &c), 70.0);
        assert_eq!(shed_cost(0.0, &c), 0.0);
    }

    #[test]
    fn stepped_table_integral() {
        let c = CostCurve::Table { from: vec![0.0, 5.0], rates: vec![10.0, 20.0] };
        c.validate().unwrap();
        assert_eq!(c.integral(8.0), 110.0);
        assert_eq!(c.integral(3.0), 30.0);
    }

    #[test]
    fn overload_threshold() {
        let c = CostCurve::Constant { rate: 1.0 };
        assert_eq!(overload_cost(80.0, 100.0, 0.85, &c), 0.0);
        assert_eq!(overload_cost(-90.0, 100.0, 0.85, &c), 90.0 - 85.0);
    }

    #[test]
    fn table_must_start_at_zero() {
        let c = CostCurve::Table { from: vec![1.0], rates: vec![1.0] };
        assert!(c.validate().is_err());
    }
}
