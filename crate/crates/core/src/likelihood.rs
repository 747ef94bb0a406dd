//! Seminar probability, the partial-observability log-likelihood and its
//! score, and the univariate probit baseline.
//!
//! Row contributions are computed independently (in parallel when the
//! `parallel` feature is on) and then reduced by pairwise summation in row
//! order, so values do not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrices;
use crate::error::{Error, Result};
use crate::numeric::{bvn_cdf, bvn_pdf, bvn_raw, cdf, pdf, Correlation, Probability, RHO_CAP};

/// Probabilities entering logs are clamped to [`P_MIN`, 1 - `P_MIN`].
pub const P_MIN: f64 = 1e-12;

/// Invite coefficients, accept coefficients, and ρ in its atanh form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub beta_invite: Vec<f64>,
    pub beta_accept: Vec<f64>,
    pub rho_z: f64,
}

impl ParameterVector {
    pub fn zeros(k_invite: usize, k_accept: usize) -> Self {
        ParameterVector {
            beta_invite: vec![0.0; k_invite],
            beta_accept: vec![0.0; k_accept],
            rho_z: 0.0,
        }
    }

    pub fn rho(&self) -> Correlation {
        Correlation::from_atanh(self.rho_z)
    }

    /// `[β_I, β_A, rho_z]`, or without `rho_z` when `include_rho` is false.
    pub fn to_flat(&self, include_rho: bool) -> Vec<f64> {
        let mut v = self.beta_invite.clone();
        v.extend_from_slice(&self.beta_accept);
        if include_rho {
            v.push(self.rho_z);
        }
        v
    }

    pub fn from_flat(flat: &[f64], k_invite: usize, k_accept: usize) -> Result<Self> {
        let rho_z = match flat.len() - k_invite.min(flat.len()) {
            n if n == k_accept => 0.0,
            n if n == k_accept + 1 => flat[k_invite + k_accept],
            _ => {
                return Err(Error::Dimension(format!(
                    "{} parameters for {k_invite} + {k_accept} coefficients",
                    flat.len()
                )))
            }
        };
        Ok(ParameterVector {
            beta_invite: flat[..k_invite].to_vec(),
            beta_accept: flat[k_invite..k_invite + k_accept].to_vec(),
            rho_z,
        })
    }

    fn check(&self, design: &DesignMatrices) -> Result<()> {
        if self.beta_invite.len() != design.x_invite.ncols()
            || self.beta_accept.len() != design.x_accept.ncols()
        {
            return Err(Error::Dimension(format!(
                "parameters ({}, {}) vs design columns ({}, {})",
                self.beta_invite.len(),
                self.beta_accept.len(),
                design.x_invite.ncols(),
                design.x_accept.ncols()
            )));
        }
        let finite = self
            .beta_invite
            .iter()
            .chain(&self.beta_accept)
            .chain(std::iter::once(&self.rho_z))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglikResult {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub n_obs: usize,
}

/// P(I = 1 and A = 1) given the two linear indices.
pub fn seminar_prob(xi: f64, xa: f64, rho: Correlation) -> Result<Probability> {
    if !xi.is_finite() || !xa.is_finite() {
        return Err(Error::Domain(format!("seminar_prob({xi}, {xa})")));
    }
    bvn_cdf(xi, xa, rho)
}

pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub(crate) fn map_rows<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Per-row log-likelihood and its derivatives with respect to the invite
/// index, the accept index and ρ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowTerms {
    pub ll: f64,
    pub d_invite: f64,
    pub d_accept: f64,
    pub d_rho: f64,
}

#[inline]
pub(crate) fn biprobit_row(a: f64, b: f64, rho: f64, z: f64, want_gradient: bool) -> RowTerms {
    let p = bvn_raw(a, b, rho).clamp(P_MIN, 1.0 - P_MIN);
    let ll = if z == 1.0 { p.ln() } else { (1.0 - p).ln() };
    if !want_gradient {
        return RowTerms {
            ll,
            d_invite: 0.0,
            d_accept: 0.0,
            d_rho: 0.0,
        };
    }
    let s = (1.0 - rho * rho).sqrt();
    let dp_da = pdf(a) * cdf((b - rho * a) / s);
    let dp_db = pdf(b) * cdf((a - rho * b) / s);
    let dp_dr = bvn_pdf(a, b, rho);
    let dl_dp = if z == 1.0 { 1.0 / p } else { -1.0 / (1.0 - p) };
    RowTerms {
        ll,
        d_invite: dl_dp * dp_da,
        d_accept: dl_dp * dp_db,
        d_rho: dl_dp * dp_dr,
    }
}

fn indices(theta: &ParameterVector, design: &DesignMatrices) -> (DVector<f64>, DVector<f64>) {
    let a = &design.x_invite * DVector::from_column_slice(&theta.beta_invite);
    let b = &design.x_accept * DVector::from_column_slice(&theta.beta_accept);
    (a, b)
}

pub(crate) fn biprobit_rows(
    theta: &ParameterVector,
    design: &DesignMatrices,
    want_gradient: bool,
) -> Vec<RowTerms> {
    let (a, b) = indices(theta, design);
    let rho = theta.rho().get().clamp(-RHO_CAP, RHO_CAP);
    map_rows(design.n_obs(), |i| biprobit_row(a[i], b[i], rho, design.z[i], want_gradient))
}

/// Sample log-likelihood of the partial-observability model, with the
/// analytic score in `[β_I, β_A, rho_z]` order when requested.
pub fn biprobit_loglik(
    theta: &ParameterVector,
    design: &DesignMatrices,
    want_gradient: bool,
) -> Result<LoglikResult> {
    theta.check(design)?;
    let rows = biprobit_rows(theta, design, want_gradient);
    let ll: Vec<f64> = rows.iter().map(|r| r.ll).collect();
    let value = pairwise_sum(&ll);
    let gradient = want_gradient.then(|| {
        let ga = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.d_invite));
        let gb = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.d_accept));
        let gr: Vec<f64> = rows.iter().map(|r| r.d_rho).collect();
        let dr_dz = 1.0 - theta.rho_z.tanh().powi(2);
        let mut g: Vec<f64> = design.x_invite.tr_mul(&ga).iter().copied().collect();
        g.extend(design.x_accept.tr_mul(&gb).iter());
        g.push(pairwise_sum(&gr) * dr_dz);
        g
    });
    Ok(LoglikResult {
        value,
        gradient,
        n_obs: design.n_obs(),
    })
}

/// Per-observation scores, one row per observation in `[β_I, β_A, rho_z]`
/// order (the `rho_z` column is omitted when `include_rho` is false).
pub fn biprobit_scores(
    theta: &ParameterVector,
    design: &DesignMatrices,
    include_rho: bool,
) -> Result<DMatrix<f64>> {
    theta.check(design)?;
    let rows = biprobit_rows(theta, design, true);
    let ki = design.x_invite.ncols();
    let ka = design.x_accept.ncols();
    let dr_dz = 1.0 - theta.rho_z.tanh().powi(2);
    let p = ki + ka + usize::from(include_rho);
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| {
        let r = &rows[i];
        if j < ki {
            r.d_invite * design.x_invite[(i, j)]
        } else if j < ki + ka {
            r.d_accept * design.x_accept[(i, j - ki)]
        } else {
            r.d_rho * dr_dz
        }
    }))
}

#[inline]
fn probit_row(eta: f64, z: f64) -> (f64, f64) {
    // Work with the signed index so both outcomes use the lower tail.
    let q = if z == 1.0 { eta } else { -eta };
    let p = cdf(q);
    let ll = p.clamp(P_MIN, 1.0 - P_MIN).ln();
    let mills = pdf(q) / p.max(f64::MIN_POSITIVE);
    (ll, if z == 1.0 { mills } else { -mills })
}

fn check_probit(beta: &[f64], x: &DMatrix<f64>, z: &[f64]) -> Result<()> {
    if beta.len() != x.ncols() || x.nrows() != z.len() {
        return Err(Error::Dimension(format!(
            "probit: {} coefficients, {}x{} design, {} outcomes",
            beta.len(),
            x.nrows(),
            x.ncols(),
            z.len()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("non-finite parameter".into()));
    }
    Ok(())
}

/// Univariate probit log-likelihood Σ z ln Φ(xβ) + (1 - z) ln Φ(-xβ).
pub fn probit_loglik(
    beta: &[f64],
    x: &DMatrix<f64>,
    z: &[f64],
    want_gradient: bool,
) -> Result<LoglikResult> {
    check_probit(beta, x, z)?;
    let eta = x * DVector::from_column_slice(beta);
    let rows = map_rows(z.len(), |i| probit_row(eta[i], z[i]));
    let ll: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gradient = want_gradient.then(|| {
        let g = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        x.tr_mul(&g).iter().copied().collect()
    });
    Ok(LoglikResult {
        value: pairwise_sum(&ll),
        gradient,
        n_obs: z.len(),
    })
}

pub fn probit_scores(beta: &[f64], x: &DMatrix<f64>, z: &[f64]) -> Result<DMatrix<f64>> {
    check_probit(beta, x, z)?;
    let eta = x * DVector::from_column_slice(beta);
    let rows = map_rows(z.len(), |i| probit_row(eta[i], z[i]).1);
    Ok(DMatrix::from_fn(z.len(), x.ncols(), |i, j| rows[i] * x[(i, j)]))
}
