//! Bivariate standard normal distribution function.
//!
//! Drezner–Wesolowsky reduction to a one-dimensional integral over the
//! correlation, evaluated with fixed Gauss–Legendre rules, following Genz's
//! `BVND` routine. For |ρ| > 0.925 the integrand is rewritten around the
//! singularity at ρ = ±1 and the asymptotic part is integrated analytically.
//! Accuracy is close to double precision over the whole plane.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use super::normal::{cdf, Correlation, Probability};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Largest |ρ| passed to the quadrature.
pub const RHO_CAP: f64 = 0.9999;

/// Returned probabilities are clamped to this interval so that logs stay finite.
pub const PROB_FLOOR: f64 = 1e-300;
pub const PROB_CEIL: f64 = 1.0 - 1e-16;

// (weight, abscissa) pairs on [-1, 1]; only the negative half is stored.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

fn rule(abs_r: f64) -> &'static [(f64, f64)] {
    if abs_r < 0.3 {
        &GL6
    } else if abs_r < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// Upper orthant probability P(X > h, Y > k) for finite h, k and |r| < 1.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let mut hk = h * k;
    let abs_r = r.abs();
    let quad = rule(abs_r);

    if abs_r < 0.925 {
        let mut bvn = 0.0;
        if abs_r > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(w, x) in quad {
                let sn = (asr * (x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                let sn = (asr * (1.0 - x) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
            bvn *= asr / (2.0 * TWO_PI);
        }
        return bvn + cdf(-h) * cdf(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    let a_sq = (1.0 - r) * (1.0 + r);
    let mut a = a_sq.sqrt();
    let b_sq = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let e = -(b_sq / a_sq + hk) / 2.0;
    if e > -100.0 {
        bvn = a
            * e.exp()
            * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0 + c * d * a_sq * a_sq / 5.0);
    }
    if hk > -160.0 {
        let b = b_sq.sqrt();
        bvn -= (-hk / 2.0).exp()
            * TWO_PI.sqrt()
            * cdf(-b / a)
            * b
            * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(w, x) in quad {
        for t in [x, -x] {
            let xs = (a * (t + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            let e = -(b_sq / xs + hk) / 2.0;
            if e > -100.0 {
                bvn += a
                    * w
                    * e.exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                        - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    }
    bvn = -bvn / TWO_PI;

    if r > 0.0 {
        bvn + cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += if h < 0.0 {
                cdf(k) - cdf(h)
            } else {
                cdf(-h) - cdf(-k)
            };
        }
        out
    }
}

/// P(X ≤ a, Y ≤ b) without the output clamp. |r| is capped at [`RHO_CAP`].
pub(crate) fn bvn_raw(a: f64, b: f64, r: f64) -> f64 {
    // Canonical argument order makes the result exactly symmetric.
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    if b == f64::INFINITY {
        return cdf(a);
    }
    let r = r.clamp(-RHO_CAP, RHO_CAP);
    upper_orthant(-a, -b, r).clamp(0.0, 1.0)
}

/// Bivariate standard normal distribution function Φ₂(a, b; ρ).
///
/// Infinite limits are handled exactly; the result is clamped to
/// [`PROB_FLOOR`, `PROB_CEIL`].
pub fn bvn_cdf(a: f64, b: f64, rho: Correlation) -> Result<Probability> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::Domain("bivariate normal cdf at NaN".into()));
    }
    let p = bvn_raw(a, b, rho.get());
    Ok(Probability::clamped(p.clamp(PROB_FLOOR, PROB_CEIL)))
}

/// Bivariate standard normal density at (a, b) with correlation r.
#[inline]
pub(crate) fn bvn_pdf(a: f64, b: f64, r: f64) -> f64 {
    let one_m = 1.0 - r * r;
    (-(a * a - 2.0 * r * a * b + b * b) / (2.0 * one_m)).exp() / (TWO_PI * one_m.sqrt())
}
