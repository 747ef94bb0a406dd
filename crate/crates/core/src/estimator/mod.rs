//! Maximum-likelihood fitting of the partial-observability model and the
//! probit baseline, with scholar-clustered sandwich covariance and the
//! likelihood-ratio test of independent shocks.

mod covariance;
mod lrtest;
mod optim;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrices;
use crate::error::{Error, Result};
use crate::likelihood::{biprobit_loglik, biprobit_scores, probit_loglik, probit_scores, ParameterVector};
use optim::{bfgs, inf_norm, newton_polish, Objective, Outcome, Stop};

pub use covariance::{clustered_covariance, robust_covariance};
pub use lrtest::{lr_statistic, lr_test_rho, LrTestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Infinity-norm bound on the gradient of the mean log-likelihood.
    pub gradient_tolerance: f64,
    pub n_starts: usize,
    pub start_perturbation_scale: f64,
    pub fix_rho_at_zero: bool,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            n_starts: 10,
            start_perturbation_scale: 0.5,
            fix_rho_at_zero: false,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) || !self.gradient_tolerance.is_finite() {
            return Err(Error::Invalid("gradient_tolerance must be positive".into()));
        }
        if !(self.start_perturbation_scale >= 0.0) || !self.start_perturbation_scale.is_finite() {
            return Err(Error::Invalid("start_perturbation_scale must be non-negative".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Invalid("n_starts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Probit,
    Biprobit,
    BiprobitRhoFixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

impl From<Stop> for StartStatus {
    fn from(s: Stop) -> Self {
        match s {
            Stop::Converged => StartStatus::Converged,
            Stop::MaxIterations => StartStatus::MaxIterations,
            Stop::LineSearch => StartStatus::LineSearchFailed,
            Stop::NonFinite => StartStatus::NonFinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: usize,
    pub loglik: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub status: StartStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    /// One name per free parameter, in `theta_hat.to_flat` order.
    pub names: Vec<String>,
    /// For the probit baseline the coefficients sit in `beta_invite`.
    pub theta_hat: ParameterVector,
    pub rho_hat: f64,
    pub loglik: f64,
    /// Infinity norm of the mean-log-likelihood gradient at `theta_hat`.
    pub gradient_norm: f64,
    /// Clustered covariance of the free parameters (ρ in atanh form).
    pub covariance: Option<DMatrix<f64>>,
    pub std_errors: Option<Vec<f64>>,
    /// Delta-method standard error of ρ itself.
    pub rho_std_error: Option<f64>,
    pub converged: bool,
    pub best_start: Option<usize>,
    pub n_starts_converged_to_best: usize,
    pub start_log: Vec<StartRecord>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub design_fingerprint: String,
}

impl FitResult {
    pub fn params(&self) -> Vec<f64> {
        self.theta_hat.to_flat(self.kind == ModelKind::Biprobit)
    }
}

pub(crate) enum Model<'a> {
    Probit { x: &'a DMatrix<f64>, z: &'a [f64] },
    Biprobit { design: &'a DesignMatrices, fix_rho: bool },
}

impl Model<'_> {
    fn kind(&self) -> ModelKind {
        match self {
            Model::Probit { .. } => ModelKind::Probit,
            Model::Biprobit { fix_rho: false, .. } => ModelKind::Biprobit,
            Model::Biprobit { fix_rho: true, .. } => ModelKind::BiprobitRhoFixed,
        }
    }

    fn n_obs(&self) -> usize {
        match self {
            Model::Probit { z, .. } => z.len(),
            Model::Biprobit { design, .. } => design.n_obs(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Model::Probit { x, .. } => x.ncols(),
            Model::Biprobit { design, fix_rho } => {
                design.x_invite.ncols() + design.x_accept.ncols() + usize::from(!fix_rho)
            }
        }
    }

    fn unpack(&self, x: &[f64]) -> Result<ParameterVector> {
        match self {
            Model::Probit { .. } => Ok(ParameterVector {
                beta_invite: x.to_vec(),
                beta_accept: Vec::new(),
                rho_z: 0.0,
            }),
            Model::Biprobit { design, .. } => {
                ParameterVector::from_flat(x, design.x_invite.ncols(), design.x_accept.ncols())
            }
        }
    }

    fn loglik(&self, x: &[f64], want_gradient: bool) -> Result<(f64, Vec<f64>)> {
        let r = match self {
            Model::Probit { x: m, z } => probit_loglik(x, m, z, want_gradient)?,
            Model::Biprobit { design, .. } => biprobit_loglik(&self.unpack(x)?, design, want_gradient)?,
        };
        let mut g = r.gradient.unwrap_or_default();
        g.truncate(self.dim());
        Ok((r.value, g))
    }

    pub(crate) fn scores(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Model::Probit { x: m, z } => probit_scores(x, m, z),
            Model::Biprobit { design, fix_rho } => biprobit_scores(&self.unpack(x)?, design, !fix_rho),
        }
    }
}

/// Negative mean log-likelihood, the quantity the optimizer minimizes.
pub(crate) struct MeanNegLoglik<'a, 'b>(pub &'a Model<'b>);

impl Objective for MeanNegLoglik<'_, '_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.0.n_obs() as f64;
        let (v, g) = self.0.loglik(x, true)?;
        Ok((-v / n, g.into_iter().map(|gi| -gi / n).collect()))
    }
}

const NEWTON_STEPS: usize = 4;
const TIE_TOLERANCE: f64 = 1e-8;

fn check_variation(z: &[f64]) -> Result<()> {
    if z.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Invalid("outcome must be 0 or 1".into()));
    }
    let ones = z.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == z.len() {
        return Err(Error::NoVariation);
    }
    Ok(())
}

/// Numerical rank of `x` from the eigenvalues of its column-scaled Gram matrix.
fn check_rank(x: &DMatrix<f64>, equation: &'static str) -> Result<()> {
    let cols = x.ncols();
    let mut gram = x.tr_mul(x);
    let d: Vec<f64> = (0..cols).map(|j| gram[(j, j)].sqrt()).collect();
    let zero_cols = d.iter().filter(|&&v| !(v > 0.0)).count();
    for i in 0..cols {
        for j in 0..cols {
            let s = d[i] * d[j];
            gram[(i, j)] = if s > 0.0 { gram[(i, j)] / s } else { 0.0 };
        }
    }
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank = eig.iter().filter(|&&v| v > 1e-10 * max).count().min(cols - zero_cols);
    if rank < cols {
        return Err(Error::RankDeficient { equation, rank, cols });
    }
    Ok(())
}

struct Optimized {
    x: Vec<f64>,
    converged: bool,
    best_start: Option<usize>,
    n_to_best: usize,
    log: Vec<StartRecord>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs BFGS from every start and keeps the best converged optimum:
/// highest log-likelihood, ties broken by parameter norm, then start index.
fn optimize(model: &Model, starts: &[Vec<f64>], options: &FitOptions) -> Optimized {
    let obj = MeanNegLoglik(model);
    let n = model.n_obs() as f64;
    let gtol = options.gradient_tolerance;
    let mut outcomes: Vec<Outcome> = Vec::with_capacity(starts.len());
    let mut log = Vec::with_capacity(starts.len());
    for (k, x0) in starts.iter().enumerate() {
        let mut out = bfgs(&obj, x0, options.max_iterations, gtol);
        if out.stop == Stop::LineSearch {
            out = newton_polish(&obj, out, gtol, NEWTON_STEPS);
        }
        log.push(StartRecord {
            start: k + 1,
            loglik: -out.f * n,
            gradient_norm: out.grad_norm(),
            iterations: out.iterations,
            status: out.stop.into(),
        });
        outcomes.push(out);
    }
    let mut best: Option<usize> = None;
    for (k, out) in outcomes.iter().enumerate() {
        if out.stop != Stop::Converged {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (lk, lb) = (log[k].loglik, log[b].loglik);
                let better = if (lk - lb).abs() <= TIE_TOLERANCE {
                    norm2(&out.x) < norm2(&outcomes[b].x)
                } else {
                    lk > lb
                };
                Some(if better { k } else { b })
            }
        };
    }
    let Some(b) = best else {
        // Report the most promising failed start so callers can inspect it.
        let k = (0..outcomes.len())
            .filter(|&k| log[k].loglik.is_finite())
            .max_by(|&i, &j| log[i].loglik.total_cmp(&log[j].loglik))
            .unwrap_or(0);
        return Optimized {
            x: outcomes[k].x.clone(),
            converged: false,
            best_start: None,
            n_to_best: 0,
            log,
        };
    };
    let lb = log[b].loglik;
    let n_to_best = (0..outcomes.len())
        .filter(|&k| outcomes[k].stop == Stop::Converged)
        .filter(|&k| (log[k].loglik - lb).abs() <= 1e-6 * lb.abs().max(1.0))
        .count();
    let polished = newton_polish(&obj, outcomes[b].clone(), gtol, NEWTON_STEPS);
    Optimized {
        x: polished.x,
        converged: true,
        best_start: Some(b + 1),
        n_to_best,
        log,
    }
}

fn finish(
    model: &Model,
    names: Vec<String>,
    opt: Optimized,
    cluster_id: &[usize],
    n_clusters: usize,
    fingerprint: String,
) -> Result<FitResult> {
    let theta_hat = model.unpack(&opt.x)?;
    let (loglik, g) = model.loglik(&opt.x, true)?;
    let n = model.n_obs() as f64;
    let gradient_norm = inf_norm(&g) / n;
    let (covariance, std_errors, rho_std_error) = if opt.converged {
        let v = covariance::sandwich(model, &opt.x, cluster_id)?;
        let se: Vec<f64> = (0..v.nrows()).map(|i| v[(i, i)].max(0.0).sqrt()).collect();
        let rho_se = (model.kind() == ModelKind::Biprobit).then(|| {
            let r = theta_hat.rho_z.tanh();
            (1.0 - r * r) * se[se.len() - 1]
        });
        (Some(v), Some(se), rho_se)
    } else {
        (None, None, None)
    };
    Ok(FitResult {
        kind: model.kind(),
        names,
        rho_hat: theta_hat.rho().get(),
        theta_hat,
        loglik,
        gradient_norm,
        covariance,
        std_errors,
        rho_std_error,
        converged: opt.converged,
        best_start: opt.best_start,
        n_starts_converged_to_best: opt.n_to_best,
        start_log: opt.log,
        n_obs: model.n_obs(),
        n_clusters,
        design_fingerprint: fingerprint,
    })
}

fn probit_fingerprint(x: &DMatrix<f64>, z: &[f64], cluster_id: &[usize]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(b"probit");
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter().chain(z) {
        h.update(v.to_le_bytes());
    }
    for &g in cluster_id {
        h.update((g as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn perturbed_starts(base: &[f64], options: &FitOptions) -> Vec<Vec<f64>> {
    let mut starts = vec![base.to_vec()];
    for k in 1..options.n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(k as u64);
        starts.push(
            base.iter()
                .map(|b| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    b + options.start_perturbation_scale * e
                })
                .collect(),
        );
    }
    starts
}

/// Univariate probit of `z` on `x`, clustered by `cluster_id`.
pub fn fit_probit(
    x: &DMatrix<f64>,
    z: &[f64],
    cluster_id: &[usize],
    names: Vec<String>,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    if x.nrows() != z.len() || cluster_id.len() != z.len() || names.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "probit: {}x{} design, {} outcomes, {} clusters, {} names",
            x.nrows(),
            x.ncols(),
            z.len(),
            cluster_id.len(),
            names.len()
        )));
    }
    check_variation(z)?;
    check_rank(x, "probit")?;
    let n_clusters = cluster_id.iter().max().map_or(0, |m| m + 1);
    let model = Model::Probit { x, z };
    let opt = optimize(&model, &perturbed_starts(&vec![0.0; x.ncols()], options), options);
    finish(&model, names, opt, cluster_id, n_clusters, probit_fingerprint(x, z, cluster_id))
}

/// Probit baseline on the union of both equations' covariates.
pub fn fit_probit_design(design: &DesignMatrices, options: &FitOptions) -> Result<FitResult> {
    design.validate()?;
    let (x, names) = design.combined();
    let mut fit = fit_probit(&x, &design.z, &design.cluster_id, names, options)?;
    fit.n_clusters = design.n_clusters();
    Ok(fit)
}

/// Single-start probit used to seed the bivariate fit.
fn seed_probit(x: &DMatrix<f64>, z: &[f64], options: &FitOptions) -> Vec<f64> {
    let model = Model::Probit { x, z };
    let obj = MeanNegLoglik(&model);
    bfgs(&obj, &vec![0.0; x.ncols()], options.max_iterations, options.gradient_tolerance).x
}

pub(crate) fn param_names(invite: &[String], accept: &[String], fix_rho: bool) -> Vec<String> {
    let mut names: Vec<String> = invite.iter().map(|n| format!("invite.{n}")).collect();
    names.extend(accept.iter().map(|n| format!("accept.{n}")));
    if !fix_rho {
        names.push("atanh_rho".into());
    }
    names
}

/// Partial-observability bivariate probit by multi-start BFGS.
pub fn fit_biprobit_partial(design: &DesignMatrices, options: &FitOptions) -> Result<FitResult> {
    fit_biprobit_with_starts(design, options, &[])
}

/// As [`fit_biprobit_partial`], with caller-supplied starting points tried
/// after the default ones.
pub fn fit_biprobit_with_starts(
    design: &DesignMatrices,
    options: &FitOptions,
    extra: &[ParameterVector],
) -> Result<FitResult> {
    options.validate()?;
    design.validate()?;
    check_variation(&design.z)?;
    check_rank(&design.x_invite, "invite")?;
    check_rank(&design.x_accept, "accept")?;
    let fix_rho = options.fix_rho_at_zero;
    let mut base = seed_probit(&design.x_invite, &design.z, options);
    base.extend(seed_probit(&design.x_accept, &design.z, options));
    if !fix_rho {
        base.push(0.0);
    }
    let mut starts = perturbed_starts(&base, options);
    starts.extend(extra.iter().map(|t| {
        let mut t = t.clone();
        if fix_rho {
            t.rho_z = 0.0;
        }
        t.to_flat(!fix_rho)
    }));
    let model = Model::Biprobit { design, fix_rho };
    if let Some(s) = starts.iter().find(|s| s.len() != model.dim()) {
        return Err(Error::Dimension(format!("start of length {} for {} parameters", s.len(), model.dim())));
    }
    let opt = optimize(&model, &starts, options);
    finish(
        &model,
        param_names(&design.invite_names, &design.accept_names, fix_rho),
        opt,
        &design.cluster_id,
        design.n_clusters(),
        design.fingerprint(),
    )
}

pub(crate) fn model_for<'a>(fit: &FitResult, design: &'a DesignMatrices, combined: &'a Option<(DMatrix<f64>, Vec<String>)>) -> Result<Model<'a>> {
    let model = match fit.kind {
        ModelKind::Probit => {
            let (x, _) = combined.as_ref().expect("combined design supplied for probit");
            Model::Probit { x, z: &design.z }
        }
        ModelKind::Biprobit => Model::Biprobit { design, fix_rho: false },
        ModelKind::BiprobitRhoFixed => Model::Biprobit { design, fix_rho: true },
    };
    if model.dim() != fit.params().len() || model.n_obs() != fit.n_obs {
        return Err(Error::Dimension("fit does not belong to this design".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests;
