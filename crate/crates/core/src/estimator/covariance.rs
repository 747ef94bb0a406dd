use nalgebra::DMatrix;

use super::optim::fd_hessian;
use super::{model_for, FitResult, MeanNegLoglik, Model, ModelKind};
use crate::data::DesignMatrices;
use crate::error::{Error, Result};

/// Largest accepted condition number of the information matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Inverse of the observed information, `(-∂²L/∂θ∂θ')⁻¹`.
fn inverse_information(model: &Model, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = model.n_obs() as f64;
    let h = fd_hessian(&MeanNegLoglik(model), x)?;
    let eig = h.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(min > 0.0) {
        return Err(Error::Numerical(format!(
            "information matrix not positive definite (smallest eigenvalue {min:.3e})"
        )));
    }
    let condition = max / min;
    if condition > MAX_CONDITION {
        return Err(Error::SingularHessian { condition });
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / (l * n));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&inv) * q.transpose())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `c · H⁻¹ M H⁻¹` with `M` the outer-product sum of cluster-summed scores
/// and `c = G/(G-1)`.
pub(crate) fn sandwich(model: &Model, x: &[f64], cluster_id: &[usize]) -> Result<DMatrix<f64>> {
    let scores = model.scores(x)?;
    if cluster_id.len() != scores.nrows() {
        return Err(Error::Dimension(format!(
            "{} cluster ids for {} observations",
            cluster_id.len(),
            scores.nrows()
        )));
    }
    let mut dense = vec![usize::MAX; cluster_id.iter().max().map_or(0, |m| m + 1)];
    let mut g = 0;
    for &c in cluster_id {
        if dense[c] == usize::MAX {
            dense[c] = g;
            g += 1;
        }
    }
    if g < 2 {
        return Err(Error::Invalid("clustered covariance needs at least two clusters".into()));
    }
    let mut summed = DMatrix::zeros(g, scores.ncols());
    for (i, &c) in cluster_id.iter().enumerate() {
        let mut row = summed.row_mut(dense[c]);
        row += scores.row(i);
    }
    let meat = summed.tr_mul(&summed);
    let bread = inverse_information(model, x)?;
    let factor = g as f64 / (g as f64 - 1.0);
    Ok(symmetrize(&bread * meat * &bread * factor))
}

fn combined_for(fit: &FitResult, design: &DesignMatrices) -> Option<(DMatrix<f64>, Vec<String>)> {
    (fit.kind == ModelKind::Probit).then(|| design.combined())
}

/// Cluster-robust covariance of a fit's free parameters.
pub fn clustered_covariance(fit: &FitResult, design: &DesignMatrices, cluster_id: &[usize]) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::Invalid("covariance requested for a fit that did not converge".into()));
    }
    let combined = combined_for(fit, design);
    let model = model_for(fit, design, &combined)?;
    sandwich(&model, &fit.params(), cluster_id)
}

/// Heteroskedasticity-robust sandwich with factor `N/(N-1)`.
pub fn robust_covariance(fit: &FitResult, design: &DesignMatrices) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::Invalid("covariance requested for a fit that did not converge".into()));
    }
    let combined = combined_for(fit, design);
    let model = model_for(fit, design, &combined)?;
    let x = fit.params();
    let scores = model.scores(&x)?;
    let n = scores.nrows() as f64;
    let bread = inverse_information(&model, &x)?;
    Ok(symmetrize(&bread * scores.tr_mul(&scores) * &bread * (n / (n - 1.0))))
}
