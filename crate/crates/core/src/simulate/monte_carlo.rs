use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{gen_population, simulate_dyads, stream, SimConfig, REPLICATION_STREAM};
use crate::data::{Covariate, INTERCEPT};
use crate::error::{Error, Result};
use crate::estimator::{
    fit_biprobit_partial, fit_biprobit_with_starts, lr_test_rho, param_names, FitOptions, FitResult,
};
use crate::likelihood::map_rows;
use crate::numeric::std_normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReplication {
    pub index: usize,
    pub seed: u64,
    pub n_obs: usize,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub lr_statistic: f64,
    pub lr_p_value: f64,
    /// Set when the unrestricted fit was repeated from the restricted optimum.
    pub refit_from_restricted: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McParameter {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Standard deviation of the estimates across replications.
    pub sd: f64,
    /// Monte Carlo standard error of the mean, `sd / sqrt(R)`.
    pub mc_se: f64,
    pub rmse: f64,
    pub mean_std_error: f64,
    pub coverage_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_replications: usize,
    pub n_failed: usize,
    pub parameters: Vec<McParameter>,
    pub lr_rejection_rate: f64,
    /// True when fewer than two replications succeeded, so `sd` and `mc_se`
    /// are reported as zero.
    pub degenerate_mc_se: bool,
    pub replications: Vec<McReplication>,
}

fn truth_vector(config: &SimConfig, names: &[String]) -> Vec<f64> {
    names
        .iter()
        .map(|n| {
            if n == "atanh_rho" {
                config.true_rho.get().atanh()
            } else if let Some(c) = n.strip_prefix("invite.") {
                config.true_beta_invite[c]
            } else {
                config.true_beta_accept[n.strip_prefix("accept.").unwrap_or(n)]
            }
        })
        .collect()
}

fn fitted(u: &FitResult) -> Result<(Vec<f64>, Vec<f64>)> {
    match (&u.std_errors, u.converged) {
        (Some(se), true) => Ok((u.params(), se.clone())),
        _ => Err(Error::NoConvergence { starts: u.start_log.len() }),
    }
}

fn replicate(config: &SimConfig, options: &FitOptions, index: usize, seed: u64) -> McReplication {
    let mut rep = McReplication {
        index,
        seed,
        n_obs: 0,
        estimates: Vec::new(),
        std_errors: Vec::new(),
        loglik: f64::NAN,
        lr_statistic: f64::NAN,
        lr_p_value: f64::NAN,
        refit_from_restricted: false,
        error: None,
    };
    let run = |rep: &mut McReplication| -> Result<()> {
        let cfg = SimConfig { seed, ..config.clone() };
        let pop = gen_population(&cfg)?;
        let sim = simulate_dyads(&pop, &cfg.truth(), &cfg.design, cfg.reference_year, seed)?;
        rep.n_obs = sim.design.n_obs();
        let mut u = fit_biprobit_partial(&sim.design, options)?;
        let restricted = FitOptions { fix_rho_at_zero: true, ..options.clone() };
        let r = fit_biprobit_partial(&sim.design, &restricted)?;
        let lr = match lr_test_rho(&u, &r) {
            Ok(lr) => lr,
            Err(Error::LoglikOrder { .. }) if r.converged => {
                // The unrestricted search missed the basin the restricted fit found.
                u = fit_biprobit_with_starts(&sim.design, options, std::slice::from_ref(&r.theta_hat))?;
                rep.refit_from_restricted = true;
                lr_test_rho(&u, &r)?
            }
            Err(e) => return Err(e),
        };
        let (est, se) = fitted(&u)?;
        rep.estimates = est;
        rep.std_errors = se;
        rep.loglik = u.loglik;
        rep.lr_statistic = lr.statistic;
        rep.lr_p_value = lr.p_value.get();
        Ok(())
    };
    if let Err(e) = run(&mut rep) {
        log::warn!("replication {index} failed: {e}");
        rep.error = Some(e.to_string());
    }
    rep
}

/// Simulates and fits `n_replications` independent markets, each with its own
/// derived seed, and summarizes the sampling behaviour of the estimator.
pub fn monte_carlo(config: &SimConfig, n_replications: usize, options: &FitOptions) -> Result<McReport> {
    if n_replications == 0 {
        return Err(Error::Invalid("n_replications must be at least 1".into()));
    }
    config.validate()?;
    options.validate()?;
    let seeds: Vec<u64> = (0..n_replications)
        .map(|r| stream(config.seed, REPLICATION_STREAM | r as u64).next_u64())
        .collect();
    let replications = map_rows(n_replications, |r| replicate(config, options, r, seeds[r]));
    let ok: Vec<&McReplication> = replications.iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() {
        return Err(Error::Numerical(format!(
            "all {n_replications} replications failed; first error: {}",
            replications[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    let cols = |cs: &[Covariate]| {
        let mut v: Vec<String> = cs.iter().map(|c| c.name().to_string()).collect();
        v.push(INTERCEPT.into());
        v
    };
    let names = param_names(&cols(&config.design.invite), &cols(&config.design.accept), false);
    let truth = truth_vector(config, &names);
    let n = ok.len() as f64;
    let crit = std_normal_quantile(0.975)?;
    let degenerate = ok.len() < 2;
    let parameters = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let est: Vec<f64> = ok.iter().map(|r| r.estimates[j]).collect();
            let mean = est.iter().sum::<f64>() / n;
            let sd = if degenerate {
                0.0
            } else {
                (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            let t = truth[j];
            let covered = ok
                .iter()
                .filter(|r| (r.estimates[j] - t).abs() <= crit * r.std_errors[j])
                .count();
            McParameter {
                name: name.clone(),
                truth: t,
                mean,
                bias: mean - t,
                sd,
                mc_se: sd / n.sqrt(),
                rmse: (est.iter().map(|e| (e - t).powi(2)).sum::<f64>() / n).sqrt(),
                mean_std_error: ok.iter().map(|r| r.std_errors[j]).sum::<f64>() / n,
                coverage_95: covered as f64 / n,
            }
        })
        .collect();
    let rejections = ok.iter().filter(|r| r.lr_p_value < 0.05).count();
    Ok(McReport {
        n_replications,
        n_failed: n_replications - ok.len(),
        parameters,
        lr_rejection_rate: rejections as f64 / n,
        degenerate_mc_se: degenerate,
        replications,
    })
}
