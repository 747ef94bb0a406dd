//! Predicted probabilities and counterfactual probability ratios from a set
//! of named coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::INTERCEPT;
use crate::error::{Error, Result};
use crate::estimator::{FitResult, ModelKind};
use crate::likelihood::{seminar_prob, P_MIN};
use crate::numeric::{std_normal_cdf, Correlation, Probability};

/// Named coefficients of both equations; the on-disk parameter-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub beta_invite: BTreeMap<String, f64>,
    pub beta_accept: BTreeMap<String, f64>,
    pub rho: Correlation,
}

impl Coefficients {
    pub fn from_fit(fit: &FitResult, invite_names: &[String], accept_names: &[String]) -> Result<Self> {
        if fit.kind == ModelKind::Probit {
            return Err(Error::Invalid("probit fits have no separate equations".into()));
        }
        let zip = |names: &[String], b: &[f64]| -> Result<BTreeMap<String, f64>> {
            if names.len() != b.len() {
                return Err(Error::Dimension(format!("{} names for {} coefficients", names.len(), b.len())));
            }
            Ok(names.iter().cloned().zip(b.iter().copied()).collect())
        };
        Ok(Coefficients {
            beta_invite: zip(invite_names, &fit.theta_hat.beta_invite)?,
            beta_accept: zip(accept_names, &fit.theta_hat.beta_accept)?,
            rho: fit.theta_hat.rho(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Invite,
    Accept,
    Seminar,
}

impl FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "invite" => Ok(Equation::Invite),
            "accept" => Ok(Equation::Accept),
            "seminar" => Ok(Equation::Seminar),
            _ => Err(Error::Invalid(format!("equation must be invite, accept or seminar, got `{s}`"))),
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::Invite => "invite",
            Equation::Accept => "accept",
            Equation::Seminar => "seminar",
        })
    }
}

fn index(beta: &BTreeMap<String, f64>, x: &BTreeMap<String, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (name, b) in beta {
        let v = match x.get(name) {
            Some(v) => *v,
            None if name == INTERCEPT => 1.0,
            None => return Err(Error::UnknownCovariate(format!("{name} (no value supplied)"))),
        };
        if !v.is_finite() {
            return Err(Error::Domain(format!("covariate {name} = {v}")));
        }
        total += b * v;
    }
    Ok(total)
}

fn check_names(eq: Equation, c: &Coefficients, x: &BTreeMap<String, f64>) -> Result<()> {
    let known = |n: &String| match eq {
        Equation::Invite => c.beta_invite.contains_key(n),
        Equation::Accept => c.beta_accept.contains_key(n),
        Equation::Seminar => c.beta_invite.contains_key(n) || c.beta_accept.contains_key(n),
    };
    match x.keys().find(|n| !known(n)) {
        Some(n) => Err(Error::UnknownCovariate(format!("{n} is not in the {eq} equation"))),
        None => Ok(()),
    }
}

/// Probability of an invitation, an acceptance, or a seminar at covariate
/// values `x`. A missing intercept value defaults to 1.
pub fn predict(eq: Equation, x: &BTreeMap<String, f64>, c: &Coefficients) -> Result<Probability> {
    check_names(eq, c, x)?;
    match eq {
        Equation::Invite => std_normal_cdf(index(&c.beta_invite, x)?),
        Equation::Accept => std_normal_cdf(index(&c.beta_accept, x)?),
        Equation::Seminar => seminar_prob(index(&c.beta_invite, x)?, index(&c.beta_accept, x)?, c.rho),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioResult {
    pub baseline: f64,
    pub counterfactual: f64,
    pub ratio: f64,
}

/// `predict(counterfactual) / predict(baseline)`.
pub fn prob_ratio(
    eq: Equation,
    baseline: &BTreeMap<String, f64>,
    counterfactual: &BTreeMap<String, f64>,
    c: &Coefficients,
) -> Result<RatioResult> {
    let p0 = predict(eq, baseline, c)?.get();
    let p1 = predict(eq, counterfactual, c)?.get();
    if p0 < P_MIN {
        return Err(Error::Domain(format!(
            "baseline probability {p0:.3e} is below {P_MIN:e}; rescale the covariates or coefficients"
        )));
    }
    Ok(RatioResult {
        baseline: p0,
        counterfactual: p1,
        ratio: p1 / p0,
    })
}
