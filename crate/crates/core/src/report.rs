//! Serializable fit reports and the two-panel text table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrices, INTERCEPT};
use crate::error::{Error, Result};
use crate::estimator::{lr_statistic, FitOptions, FitResult, LrTestResult, ModelKind, StartRecord};
use crate::numeric::std_normal_cdf;
use crate::query::Coefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub loglik: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Invite equation, or the single equation of a probit fit.
    pub invite: Vec<CoefficientRow>,
    pub accept: Vec<CoefficientRow>,
    pub rho: Option<RhoRow>,
    pub lr_test_rho: Option<LrTestResult>,
    /// Coefficients in parameter-file form, for `predict` and `ratio`.
    pub coefficients: Option<Coefficients>,
    pub best_start: Option<usize>,
    pub n_starts_converged_to_best: usize,
    pub start_log: Vec<StartRecord>,
    pub options: FitOptions,
    pub design_fingerprint: String,
}

fn row(name: &str, estimate: f64, se: Option<f64>) -> Result<CoefficientRow> {
    let z = se.filter(|s| *s > 0.0).map(|s| estimate / s);
    let p_value = z.map(|z| std_normal_cdf(-z.abs()).map(|p| 2.0 * p.get())).transpose()?;
    Ok(CoefficientRow {
        name: name.to_string(),
        estimate,
        std_error: se,
        z,
        p_value,
    })
}

impl FitReport {
    pub fn new(fit: &FitResult, design: &DesignMatrices, options: &FitOptions) -> Result<Self> {
        let se = |j: usize| fit.std_errors.as_ref().map(|s| s[j]);
        let (invite, accept, coefficients) = match fit.kind {
            ModelKind::Probit => {
                let rows = fit
                    .names
                    .iter()
                    .zip(&fit.theta_hat.beta_invite)
                    .enumerate()
                    .map(|(j, (n, b))| row(n, *b, se(j)))
                    .collect::<Result<_>>()?;
                (rows, Vec::new(), None)
            }
            _ => {
                let ki = design.invite_names.len();
                let inv = design
                    .invite_names
                    .iter()
                    .zip(&fit.theta_hat.beta_invite)
                    .enumerate()
                    .map(|(j, (n, b))| row(n, *b, se(j)))
                    .collect::<Result<_>>()?;
                let acc = design
                    .accept_names
                    .iter()
                    .zip(&fit.theta_hat.beta_accept)
                    .enumerate()
                    .map(|(j, (n, b))| row(n, *b, se(ki + j)))
                    .collect::<Result<_>>()?;
                let c = Coefficients::from_fit(fit, &design.invite_names, &design.accept_names)?;
                (inv, acc, Some(c))
            }
        };
        let rho = match fit.kind {
            ModelKind::Probit => None,
            ModelKind::BiprobitRhoFixed => Some(RhoRow { estimate: 0.0, std_error: None }),
            ModelKind::Biprobit => Some(RhoRow {
                estimate: fit.rho_hat,
                std_error: fit.rho_std_error,
            }),
        };
        Ok(FitReport {
            model: fit.kind,
            n_obs: fit.n_obs,
            n_clusters: fit.n_clusters,
            loglik: fit.loglik,
            converged: fit.converged,
            gradient_norm: fit.gradient_norm,
            invite,
            accept,
            rho,
            lr_test_rho: None,
            coefficients,
            best_start: fit.best_start,
            n_starts_converged_to_best: fit.n_starts_converged_to_best,
            start_log: fit.start_log.clone(),
            options: options.clone(),
            design_fingerprint: fit.design_fingerprint.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Two-panel table: coefficients with clustered standard errors below,
    /// then ρ, the log pseudolikelihood, counts and the ρ = 0 test.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let line = "-".repeat(44);
        let _ = writeln!(out, "{line}");
        let panels: Vec<(&str, &[CoefficientRow])> = match self.model {
            ModelKind::Probit => vec![("Probability of a seminar", &self.invite)],
            _ => vec![("Probability to invite", &self.invite), ("Probability to accept", &self.accept)],
        };
        for (title, rows) in panels {
            let _ = writeln!(out, "{title}");
            for r in rows.iter().filter(|r| r.name != INTERCEPT) {
                let stars = match r.p_value {
                    Some(p) if p < 0.01 => "***",
                    Some(p) if p < 0.05 => "**",
                    Some(p) if p < 0.10 => "*",
                    _ => "",
                };
                let _ = writeln!(out, "  {:<26}{:>10.3}{stars}", r.name, r.estimate);
                if let Some(se) = r.std_error {
                    let _ = writeln!(out, "  {:<26}{:>10}", "", format!("({se:.3})"));
                }
            }
        }
        let _ = writeln!(out, "{line}");
        if let Some(rho) = &self.rho {
            let _ = writeln!(out, "  {:<26}{:>10.3}", "rho", rho.estimate);
            if let Some(se) = rho.std_error {
                let _ = writeln!(out, "  {:<26}{:>10}", "", format!("({se:.3})"));
            }
        }
        let _ = writeln!(out, "  {:<26}{:>10.3}", "Log pseudolikelihood", self.loglik);
        let _ = writeln!(out, "  {:<26}{:>10}", "Observations", self.n_obs);
        let _ = writeln!(out, "  {:<26}{:>10}", "Clusters (scholars)", self.n_clusters);
        if let Some(lr) = &self.lr_test_rho {
            let _ = writeln!(out, "  {:<26}{:>10.3}", "Test rho=0", lr.statistic);
            let _ = writeln!(out, "  {:<26}{:>10.4}", "  p-value", lr.p_value.get());
        }
        let _ = writeln!(out, "{line}");
        let _ = writeln!(
            out,
            "Clustered standard errors in parentheses. Constants not shown.\n*** p<0.01, ** p<0.05, * p<0.1.{}",
            if self.converged { "" } else { "\nWARNING: no start converged." }
        );
        out
    }
}

/// LR test of ρ = 0 from two saved reports.
pub fn lr_test_reports(unrestricted: &FitReport, restricted: &FitReport) -> Result<LrTestResult> {
    if unrestricted.design_fingerprint != restricted.design_fingerprint {
        return Err(Error::Invalid("reports were estimated on different designs".into()));
    }
    if !unrestricted.converged || !restricted.converged {
        return Err(Error::Invalid("both fits must have converged".into()));
    }
    let result = lr_statistic(unrestricted.loglik, restricted.loglik)?;
    if unrestricted.model != ModelKind::Biprobit || restricted.model != ModelKind::BiprobitRhoFixed {
        return Err(Error::Invalid(
            "expected an unrestricted report and one with rho fixed at zero".into(),
        ));
    }
    Ok(result)
}
