//! Standard normal helpers and the two marginal families used for zonal
//! load and wind speed.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Uniform draws are clamped to this distance from 0 and 1 before any inverse CDF.
pub const U_CLAMP: f64 = 1e-12;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF (Wichura's AS 241, about 1e-16 relative).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = poly(
            r,
            &[
                3.387_132_872_796_366_608,
                133.141_667_891_784_377_45,
                1_971.590_950_306_551_442_7,
                13_731.693_765_509_461_125,
                45_921.953_931_549_871_457,
                67_265.770_927_008_700_853,
                33_430.575_583_588_128_105,
                2_509.080_928_730_122_672_7,
            ],
        );
        let den = poly(
            r,
            &[
                1.0,
                42.313_330_701_600_911_252,
                687.187_007_492_057_908_3,
                5_394.196_021_424_751_107_7,
                21_213.794_301_586_595_867,
                39_307.895_800_092_710_61,
                28_729.085_735_721_942_674,
                5_226.495_278_852_854_561,
            ],
        );
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(
            r,
            &[
                1.423_437_110_749_683_577_34,
                4.630_337_846_156_545_295_9,
                5.769_497_221_460_691_405_5,
                3.647_848_324_763_204_605_04,
                1.270_458_252_452_368_382_58,
                0.241_780_725_177_450_611_77,
                0.022_723_844_989_269_184_583_3,
                7.745_450_142_783_414_076_4e-4,
            ],
        ) / poly(
            r,
            &[
                1.0,
                2.053_191_626_637_758_821_87,
                1.676_384_830_183_803_849_4,
                0.689_767_334_985_100_004_55,
                0.148_103_976_427_480_074_59,
                0.015_198_666_563_616_457_196_6,
                5.475_938_084_995_344_946e-4,
                1.050_750_071_644_416_843_24e-9,
            ],
        )
    } else {
        r -= 5.0;
        poly(
            r,
            &[
                6.657_904_643_501_103_777_2,
                5.463_784_911_164_114_369_9,
                1.784_826_539_917_291_335_8,
                0.296_560_571_828_504_891_23,
                0.026_532_189_526_576_123_093,
                0.001_242_660_947_388_078_438_6,
                2.711_555_568_743_487_578_15e-5,
                2.010_334_399_292_288_132_65e-7,
            ],
        ) / poly(
            r,
            &[
                1.0,
                0.599_832_206_555_887_937_69,
                0.136_929_880_922_735_805_31,
                0.014_875_361_290_850_614_852_5,
                7.868_691_311_456_132_591e-4,
                1.846_318_317_510_054_681_8e-5,
                1.421_511_758_316_445_888_7e-7,
                2.044_263_103_389_939_785_64e-15,
            ],
        )
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(x: f64, c: &[f64]) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalSpec {
    /// Normal(mu, sigma) restricted to [a, b]. Units are MW.
    TruncatedNormal { mu: f64, sigma: f64, a: f64, b: f64 },
    /// Weibull with shape `k` and scale `lambda` (m/s).
    Weibull { k: f64, lambda: f64 },
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalSpec::TruncatedNormal { mu, sigma, a, b } => {
                if !(sigma > 0.0 && a < b && mu.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "truncated normal needs sigma > 0 and a < b (got sigma={sigma}, a={a}, b={b})"
                    )));
                }
            }
            MarginalSpec::Weibull { k, lambda } => {
                if !(k > 0.0 && lambda > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "weibull needs k > 0 and lambda > 0 (got k={k}, lambda={lambda})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginalSpec::TruncatedNormal { mu, sigma, a, b } => {
                if x <= a {
                    return 0.0;
                }
                if x >= b {
                    return 1.0;
                }
                let lo = normal_cdf((a - mu) / sigma);
                let hi = normal_cdf((b - mu) / sigma);
                (normal_cdf((x - mu) / sigma) - lo) / (hi - lo)
            }
            MarginalSpec::Weibull { k, lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / lambda).powf(k)).exp_m1()
                }
            }
        }
    }

    /// Inverse CDF; `u` is clamped into `[U_CLAMP, 1 - U_CLAMP]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(U_CLAMP, 1.0 - U_CLAMP);
        match *self {
            MarginalSpec::TruncatedNormal { mu, sigma, a, b } => {
                let lo = normal_cdf((a - mu) / sigma);
                let hi = normal_cdf((b - mu) / sigma);
                let x = mu + sigma * normal_quantile(lo + u * (hi - lo));
                x.clamp(a, b)
            }
            MarginalSpec::Weibull { k, lambda } => lambda * (-(-u).ln_1p()).powf(1.0 / k),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalSpec::TruncatedNormal { mu, sigma, a, b } => {
                let (al, be) = ((a - mu) / sigma, (b - mu) / sigma);
                let z = normal_cdf(be) - normal_cdf(al);
                mu + sigma * (normal_pdf(al) - normal_pdf(be)) / z
            }
            MarginalSpec::Weibull { k, lambda } => lambda * gamma(1.0 + 1.0 / k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-9 * p.min(1.0 - p), "p={p}");
        }
        for &p in &[1e-12, 1e-9, 1e-6, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!(((normal_cdf(x) - p) / p.min(1.0 - p)).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn quantile_symmetry_and_centre() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(0.2) + 0.841_621_233_572_914_3).abs() < 1e-15);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert!((normal_quantile(0.1) + normal_quantile(0.9)).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_stays_inside() {
        let m = MarginalSpec::TruncatedNormal { mu: 50.0, sigma: 15.0, a: 10.0, b: 90.0 };
        for &u in &[0.0, 1e-15, 0.3, 0.999_999_999, 1.0] {
            let x = m.quantile(u);
            assert!((10.0..=90.0).contains(&x));
        }
        assert!((m.cdf(m.quantile(0.37)) - 0.37).abs() < 1e-12);
    }

    #[test]
    fn weibull_round_trip() {
        let m = MarginalSpec::Weibull { k: 2.0, lambda: 8.0 };
        for &u in &[0.01, 0.5, 0.99] {
            assert!((m.cdf(m.quantile(u)) - u).abs() < 1e-12);
        }
        // k = 2: mean = lambda * sqrt(pi) / 2
        assert!((m.mean() - 8.0 * std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }
}
