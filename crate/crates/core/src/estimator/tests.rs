use nalgebra::DMatrix;

use super::*;
use crate::numeric::std_normal_quantile;
use crate::oracle;
use crate::test_support::{rows, simulate_biprobit};

const TRUE_I: [f64; 3] = [0.8, 0.6, 0.4];
const TRUE_A: [f64; 3] = [-0.5, 0.7, 0.6];

fn quick() -> FitOptions {
    FitOptions {
        n_starts: 3,
        seed: 7,
        ..FitOptions::default()
    }
}

#[test]
fn option_validation() {
    assert!(FitOptions::default().validate().is_ok());
    let bad = [
        FitOptions { n_starts: 0, ..FitOptions::default() },
        FitOptions { gradient_tolerance: 0.0, ..FitOptions::default() },
        FitOptions { start_perturbation_scale: f64::NAN, ..FitOptions::default() },
    ];
    for o in bad {
        assert!(o.validate().is_err());
    }
}

#[test]
fn probit_rejects_constant_outcome_and_collinear_columns() {
    let x = DMatrix::from_element(10, 1, 1.0);
    let err = fit_probit(&x, &[1.0; 10], &[0; 10], vec!["intercept".into()], &quick()).unwrap_err();
    assert_eq!(err.to_string(), "outcome has no variation");
    let x2 = DMatrix::from_fn(10, 2, |i, _| i as f64);
    let z: Vec<f64> = (0..10).map(|i| f64::from(i % 2)).collect();
    let ids: Vec<usize> = (0..10).collect();
    let err = fit_probit(&x2, &z, &ids, vec!["a".into(), "b".into()], &quick()).unwrap_err();
    assert!(matches!(err, Error::RankDeficient { rank: 1, cols: 2, .. }));
}

#[test]
fn intercept_only_probit_is_closed_form() {
    let z: Vec<f64> = (0..400).map(|i| f64::from(u8::from(i % 4 == 0))).collect();
    let ids: Vec<usize> = (0..400).collect();
    let x = DMatrix::from_element(400, 1, 1.0);
    let fit = fit_probit(&x, &z, &ids, vec!["intercept".into()], &quick()).unwrap();
    assert!(fit.converged);
    let exact = std_normal_quantile(0.25).unwrap();
    assert!((fit.theta_hat.beta_invite[0] - exact).abs() < 1e-8);
}

#[test]
fn two_parameter_probit_matches_grid_search() {
    let d = simulate_biprobit(3, 200, TRUE_I, TRUE_A, 0.0);
    let x = d.x_invite.columns(1, 2).into_owned();
    let xr = rows(&x);
    let ids: Vec<usize> = (0..200).collect();
    let fit = fit_probit(&x, &d.z, &ids, vec!["x2".into(), "intercept".into()], &quick()).unwrap();
    let b = &fit.theta_hat.beta_invite;
    let grid = oracle::grid_maximize_2d(|u, v| oracle::probit_loglik(&xr, &d.z, &[u, v]), (0.0, 0.0), 3.0, 1e-6);
    assert!((b[0] - grid.0).abs() < 1e-4 && (b[1] - grid.1).abs() < 1e-4, "{b:?} vs {grid:?}");
    let at_zero = probit_loglik(&[0.0, 0.0], &x, &d.z, false).unwrap().value;
    assert!(fit.loglik >= at_zero);
}

#[test]
fn biprobit_recovers_truth_on_moderate_sample() {
    let d = simulate_biprobit(11, 6000, TRUE_I, TRUE_A, 0.3);
    let fit = fit_biprobit_partial(&d, &quick()).unwrap();
    assert!(fit.converged);
    assert!(fit.gradient_norm <= 1e-8);
    let se = fit.std_errors.as_ref().unwrap();
    let truth: Vec<f64> = TRUE_I.iter().chain(&TRUE_A).copied().chain([0.3f64.atanh()]).collect();
    for (j, t) in truth.iter().enumerate() {
        let z = (fit.params()[j] - t) / se[j];
        assert!(z.abs() < 4.0, "{}: {} vs {t} (se {})", fit.names[j], fit.params()[j], se[j]);
    }
    assert_eq!(fit.start_log.len(), 3);
    assert!(fit.n_starts_converged_to_best >= 1);
    let c = fit.covariance.as_ref().unwrap();
    assert!((c - c.transpose()).abs().max() <= 1e-10);
}

#[test]
fn fits_are_deterministic() {
    let d = simulate_biprobit(12, 1500, TRUE_I, TRUE_A, 0.3);
    let a = fit_biprobit_partial(&d, &quick()).unwrap();
    let b = fit_biprobit_partial(&d, &quick()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn restricted_fit_never_beats_unrestricted() {
    let d = simulate_biprobit(13, 2000, TRUE_I, TRUE_A, 0.0);
    let u = fit_biprobit_partial(&d, &quick()).unwrap();
    let r = fit_biprobit_partial(&d, &FitOptions { fix_rho_at_zero: true, ..quick() }).unwrap();
    assert_eq!(r.kind, ModelKind::BiprobitRhoFixed);
    assert_eq!(r.params().len(), 6);
    assert!(u.loglik >= r.loglik);
    let lr = lr_test_rho(&u, &r).unwrap();
    assert!(lr.statistic >= 0.0 && lr.statistic < 10.0);
    assert!(lr_test_rho(&r, &u).is_err());
}

#[test]
fn singleton_clusters_equal_robust_sandwich() {
    let d = simulate_biprobit(14, 1500, TRUE_I, TRUE_A, 0.3);
    let fit = fit_biprobit_partial(&d, &quick()).unwrap();
    let ids: Vec<usize> = (0..d.n_obs()).collect();
    let clustered = clustered_covariance(&fit, &d, &ids).unwrap();
    let robust = robust_covariance(&fit, &d).unwrap();
    assert!((clustered - robust).abs().max() <= 1e-10);
}

#[test]
fn duplicating_rows_within_clusters_changes_nothing() {
    let d = simulate_biprobit(15, 1500, TRUE_I, TRUE_A, 0.3);
    let idx: Vec<usize> = (0..d.n_obs()).flat_map(|i| [i, i]).collect();
    let mut dup = d.clone();
    dup.x_invite = d.x_invite.select_rows(&idx);
    dup.x_accept = d.x_accept.select_rows(&idx);
    dup.z = idx.iter().map(|&i| d.z[i]).collect();
    dup.cluster_id = idx.iter().map(|&i| d.cluster_id[i]).collect();
    let a = fit_biprobit_partial(&d, &quick()).unwrap();
    let b = fit_biprobit_partial(&dup, &quick()).unwrap();
    for (x, y) in a.params().iter().zip(b.params()) {
        assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
    }
    let diff = (a.covariance.unwrap() - b.covariance.unwrap()).abs().max();
    assert!(diff <= 1e-8, "covariance diff {diff}");
}

#[test]
fn rescaling_a_column_rescales_its_coefficient() {
    let d = simulate_biprobit(16, 2000, TRUE_I, TRUE_A, 0.3);
    let scaled = d.with_scaled_column(true, "x2", 4.0).unwrap();
    let a = fit_biprobit_partial(&d, &quick()).unwrap();
    let b = fit_biprobit_partial(&scaled, &quick()).unwrap();
    assert!((a.loglik - b.loglik).abs() <= 1e-6);
    assert!((a.theta_hat.beta_invite[1] - 4.0 * b.theta_hat.beta_invite[1]).abs() <= 1e-6);
    assert!((a.rho_hat - b.rho_hat).abs() <= 1e-6);
}

#[test]
fn identical_equations_are_rejected() {
    let mut d = simulate_biprobit(17, 300, TRUE_I, TRUE_A, 0.3);
    d.accept_names = d.invite_names.clone();
    let err = fit_biprobit_partial(&d, &quick()).unwrap_err();
    assert!(matches!(err, Error::ExclusionRestriction(_)));
}

#[test]
fn iteration_limit_yields_failed_fit_with_log() {
    let d = simulate_biprobit(18, 800, TRUE_I, TRUE_A, 0.3);
    let opts = FitOptions { max_iterations: 1, ..quick() };
    let fit = fit_biprobit_partial(&d, &opts).unwrap();
    assert!(!fit.converged);
    assert!(fit.covariance.is_none() && fit.best_start.is_none());
    assert_eq!(fit.start_log.len(), 3);
    assert!(fit.start_log.iter().all(|s| s.status == StartStatus::MaxIterations));
    assert!(lr_test_rho(&fit, &fit).is_err());
}

#[test]
fn lr_arithmetic() {
    let zero = lr_statistic(-100.0, -100.0).unwrap();
    assert_eq!(zero.statistic, 0.0);
    assert_eq!(zero.p_value.get(), 1.0);
    let t = lr_statistic(-5000.0, -5010.8835).unwrap();
    assert!((t.statistic - 21.767).abs() < 1e-9);
    assert_eq!(t.df, 1);
    assert!((t.p_value.get() - oracle::chi_square_1_sf(t.statistic)).abs() < 1e-6);
    assert!(lr_statistic(-100.0, -99.0).is_err());
    assert_eq!(lr_statistic(-100.0, -100.0 + 1e-9).unwrap().statistic, 0.0);
}

#[test]
fn probit_on_design_uses_union_of_columns() {
    let d = simulate_biprobit(19, 1000, TRUE_I, TRUE_A, 0.3);
    let fit = fit_probit_design(&d, &quick()).unwrap();
    assert_eq!(fit.names, ["x1", "x2", "x3", "intercept"]);
    assert_eq!(fit.n_clusters, 200);
    let ids: Vec<usize> = (0..d.n_obs()).collect();
    let c = clustered_covariance(&fit, &d, &ids).unwrap();
    let r = robust_covariance(&fit, &d).unwrap();
    assert!((c - r).abs().max() <= 1e-10);
}
