use serde::{Deserialize, Serialize};

use super::{FitResult, ModelKind};
use crate::error::{Error, Result};
use crate::numeric::{chi_square_sf, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: Probability,
}

/// Slack on `2(L_u - L_r)` below zero, relative to `max(1, |L_u|)`.
const SLACK: f64 = 1e-8;

/// LR statistic for one restriction given the two maximized log-likelihoods.
pub fn lr_statistic(loglik_unrestricted: f64, loglik_restricted: f64) -> Result<LrTestResult> {
    if !loglik_unrestricted.is_finite() || !loglik_restricted.is_finite() {
        return Err(Error::Domain("non-finite log-likelihood".into()));
    }
    let raw = 2.0 * (loglik_unrestricted - loglik_restricted);
    if raw < -SLACK * loglik_unrestricted.abs().max(1.0) {
        return Err(Error::LoglikOrder {
            restricted: loglik_restricted,
            unrestricted: loglik_unrestricted,
        });
    }
    let statistic = raw.max(0.0);
    Ok(LrTestResult {
        statistic,
        df: 1,
        p_value: Probability::new(chi_square_sf(statistic, 1)?)?,
    })
}

/// Tests ρ = 0 from an unrestricted fit and a fit with ρ fixed at zero on
/// the same design.
pub fn lr_test_rho(unrestricted: &FitResult, restricted: &FitResult) -> Result<LrTestResult> {
    if unrestricted.design_fingerprint != restricted.design_fingerprint {
        return Err(Error::Invalid("fits were estimated on different designs".into()));
    }
    if !unrestricted.converged || !restricted.converged {
        return Err(Error::Invalid("both fits must have converged".into()));
    }
    let result = lr_statistic(unrestricted.loglik, restricted.loglik)?;
    if unrestricted.kind != ModelKind::Biprobit || restricted.kind != ModelKind::BiprobitRhoFixed {
        return Err(Error::Invalid(
            "expected an unrestricted fit and a fit with rho fixed at zero".into(),
        ));
    }
    Ok(result)
}
