//! Slow, independent reference computations used only by tests.
//!
//! Nothing here shares code with the production paths it checks: the normal
//! distribution comes from quadrature of the density, the bivariate CDF from
//! nested two-dimensional adaptive quadrature, and great-circle distances
//! from 3-D chord geometry.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, tol / 2.0, depth - 1) + adapt(f, m, b, tol / 2.0, depth - 1)
}

/// Adaptive Gauss–Kronrod integral of `f` over [a, b], first split into `panels`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * w;
            adapt(&f, lo, lo + w, tol / panels as f64, 40)
        })
        .sum()
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ(x) by quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < 0.0 {
        integrate(density, (x - 40.0).max(-40.0), x, 8, 1e-17)
    } else {
        1.0 - integrate(density, -40.0, -x, 8, 1e-17)
    }
}

const LOWER: f64 = -12.0;

/// Φ₂(a, b; ρ) by nested adaptive quadrature over the bivariate density.
pub fn bvn_cdf(a: f64, b: f64, rho: f64) -> f64 {
    let a = a.clamp(LOWER, -LOWER);
    let b = b.clamp(LOWER, -LOWER);
    let s = (1.0 - rho * rho).sqrt();
    let norm = 1.0 / (2.0 * PI * s);
    let outer = |x: f64| {
        // Inner integrand is concentrated around ρx with scale s.
        let c = rho * x;
        let lo = (c - 14.0 * s).max(LOWER);
        let hi = (c + 14.0 * s).min(b);
        if hi <= lo {
            return 0.0;
        }
        let inner = |y: f64| {
            let q = (x * x - 2.0 * rho * x * y + y * y) / (2.0 * s * s);
            norm * (-q).exp()
        };
        integrate(inner, lo, hi, 4, 1e-15)
    };
    integrate(outer, LOWER, a, ((a - LOWER) / 0.25).ceil().max(1.0) as usize, 1e-13)
}

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6_371.008_8;

/// Great-circle distance through the 3-D chord between unit position vectors.
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let to_vec = |lat: f64, lon: f64| {
        let (la, lo) = (lat.to_radians(), lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let u = to_vec(lat1, lon1);
    let v = to_vec(lat2, lon2);
    let chord = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_KM * (chord / 2.0).min(1.0).asin()
}

/// P(χ²₁ > x) as twice a normal tail integral.
pub fn chi_square_1_sf(x: f64) -> f64 {
    let t = x.sqrt();
    2.0 * integrate(density, t, t + 40.0, 16, 1e-18)
}

/// Straight-line per-row partial-observability log-likelihood using the oracle CDF.
pub fn biprobit_loglik(
    x_invite: &[Vec<f64>],
    x_accept: &[Vec<f64>],
    z: &[f64],
    beta_invite: &[f64],
    beta_accept: &[f64],
    rho: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..z.len() {
        let a: f64 = x_invite[i].iter().zip(beta_invite).map(|(x, b)| x * b).sum();
        let b: f64 = x_accept[i].iter().zip(beta_accept).map(|(x, b)| x * b).sum();
        let p = bvn_cdf(a, b, rho).clamp(1e-12, 1.0 - 1e-12);
        total += if z[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    total
}

/// Φ(x) from Marsaglia's Taylor series 1/2 + φ(x) Σ x^(2n+1) / (2n+1)!!,
/// used where the quadrature version is too slow.
pub fn normal_cdf_series(x: f64) -> f64 {
    if x.abs() > 8.0 {
        return normal_cdf(x);
    }
    let (mut term, mut sum, mut k) = (x, x, 1.0);
    while term.abs() > 1e-17 * sum.abs() {
        k += 2.0;
        term *= x * x / k;
        sum += term;
    }
    0.5 + density(x) * sum
}

/// Straight-line probit log-likelihood using the series CDF.
pub fn probit_loglik(x: &[Vec<f64>], z: &[f64], beta: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..z.len() {
        let idx: f64 = x[i].iter().zip(beta).map(|(x, b)| x * b).sum();
        let p = if z[i] == 1.0 {
            normal_cdf_series(idx)
        } else {
            normal_cdf_series(-idx)
        };
        total += p.ln();
    }
    total
}

/// Maximizes a two-parameter function by successively refined grid search.
pub fn grid_maximize_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    centre: (f64, f64),
    half_width: f64,
    target_resolution: f64,
) -> (f64, f64) {
    let mut c = centre;
    let mut w = half_width;
    let n = 20;
    while w > target_resolution / 4.0 {
        let mut best = (f64::NEG_INFINITY, c);
        for i in 0..=n {
            for j in 0..=n {
                let p = (
                    c.0 - w + 2.0 * w * i as f64 / n as f64,
                    c.1 - w + 2.0 * w * j as f64 / n as f64,
                );
                let v = f(p.0, p.1);
                if v > best.0 {
                    best = (v, p);
                }
            }
        }
        c = best.1;
        w *= 0.25;
    }
    c
}
