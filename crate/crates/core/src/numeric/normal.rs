//! Univariate standard normal density, distribution and quantile functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A probability in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    pub(crate) fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A correlation coefficient strictly inside (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Correlation(f64);

impl Correlation {
    pub const ZERO: Correlation = Correlation(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value > -1.0 && value < 1.0 {
            Ok(Correlation(value))
        } else {
            Err(Error::Domain(format!("correlation {value} outside (-1, 1)")))
        }
    }

    /// Correlation from its Fisher-z (atanh) representation; never reaches ±1
    /// except through floating-point saturation, which `new` would reject, so
    /// the value is pulled back inside the open interval.
    pub fn from_atanh(z: f64) -> Self {
        let r = z.tanh();
        Correlation(r.clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Correlation {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Correlation::new(value)
    }
}

impl From<Correlation> for f64 {
    fn from(r: Correlation) -> f64 {
        r.0
    }
}

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("normal density at non-finite {x}")));
    }
    Ok(pdf(x))
}

/// Standard normal distribution function, accurate to a few ulps through `erfc`.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if x.is_nan() {
        return Err(Error::Domain("normal cdf at NaN".into()));
    }
    Ok(Probability::clamped(cdf(x)))
}

// Acklam's rational approximation, used as the starting point for Halley refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the standard normal distribution function on the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile requires 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower half so the residual Φ(x) - p keeps relative precision.
    let (tail, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut x = acklam(tail);
    for _ in 0..3 {
        let e = cdf(x) - tail;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}
