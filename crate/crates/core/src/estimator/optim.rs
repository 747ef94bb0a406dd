//! Inverse-Hessian BFGS with Armijo backtracking, plus a Newton polish that
//! uses a finite-difference Hessian of the analytic gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Smooth objective to minimize.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Converged,
    MaxIterations,
    LineSearch,
    NonFinite,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub stop: Stop,
}

impl Outcome {
    pub fn grad_norm(&self) -> f64 {
        inf_norm(&self.g)
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

fn try_eval(obj: &impl Objective, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    obj.value_grad(x).ok().filter(|(f, g)| finite(*f, g))
}

pub(crate) fn bfgs(obj: &impl Objective, x0: &[f64], max_iter: usize, gtol: f64) -> Outcome {
    let n = obj.dim();
    let mut x = x0.to_vec();
    let Some((mut f, mut g)) = try_eval(obj, &x) else {
        return Outcome {
            x,
            f: f64::NAN,
            g: vec![f64::NAN; n],
            iterations: 0,
            stop: Stop::NonFinite,
        };
    };
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut iterations = 0;
    let stop = loop {
        if inf_norm(&g) <= gtol {
            break Stop::Converged;
        }
        if iterations >= max_iter {
            break Stop::MaxIterations;
        }
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hinv.fill_with_identity();
            scaled = false;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut alpha = if scaled { 1.0 } else { (1.0 / inf_norm(&d)).min(1.0) };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((fn_, gn)) = try_eval(obj, &xn) {
                let armijo = fn_ <= f + ARMIJO_C1 * alpha * slope;
                // Near the optimum f is flat to rounding; accept steps that
                // do not raise f beyond noise and still shrink the gradient.
                let noise = fn_ - f <= 4.0 * f64::EPSILON * f.abs() && inf_norm(&gn) < inf_norm(&g);
                if armijo || noise {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break Stop::LineSearch;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * yy.sqrt() {
            if !scaled {
                hinv = DMatrix::identity(n, n) * (sy / yy);
                scaled = true;
            }
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            let rho = 1.0 / sy;
            // H+ = H + ((sy + yHy) ss')/sy² - (Hy s' + s y'H)/sy
            hinv += (&sv * sv.transpose()) * ((sy + yhy) * rho * rho)
                - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        x = xn;
        f = fn_;
        g = gn;
        iterations += 1;
    };
    Outcome {
        x,
        f,
        g,
        iterations,
        stop,
    }
}

/// Central-difference Jacobian of the gradient, symmetrized.
pub(crate) fn fd_hessian(obj: &impl Objective, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let base = f64::EPSILON.cbrt();
    for j in 0..n {
        let step = base * x[j].abs().max(1.0);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[j] += step;
        dn[j] -= step;
        let gu = obj.value_grad(&up)?.1;
        let gd = obj.value_grad(&dn)?.1;
        for i in 0..n {
            h[(i, j)] = (gu[i] - gd[i]) / (up[j] - dn[j]);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Newton steps with a fixed Hessian taken at the starting point. Steps are
/// kept only while they shrink the gradient without raising f beyond noise.
pub(crate) fn newton_polish(obj: &impl Objective, mut out: Outcome, gtol: f64, steps: usize) -> Outcome {
    if !finite(out.f, &out.g) {
        return out;
    }
    let Ok(h) = fd_hessian(obj, &out.x) else {
        return out;
    };
    let Some(chol) = h.clone().cholesky() else {
        return out;
    };
    for _ in 0..steps {
        let d = chol.solve(&DVector::from_column_slice(&out.g));
        let xn: Vec<f64> = out.x.iter().zip(d.iter()).map(|(x, d)| x - d).collect();
        let Some((fn_, gn)) = try_eval(obj, &xn) else {
            break;
        };
        let slack = 4.0 * f64::EPSILON * out.f.abs().max(1e-300);
        if fn_ - out.f > slack || inf_norm(&gn) >= inf_norm(&out.g) {
            break;
        }
        out.x = xn;
        out.f = fn_;
        out.g = gn;
    }
    if inf_norm(&out.g) <= gtol {
        out.stop = Stop::Converged;
    }
    out
}
