//! wasm-bindgen exports for the static page in `www/`.

use std::collections::BTreeMap;

use biprobit_core::estimator::{fit_biprobit_partial, lr_test_rho, FitOptions};
use biprobit_core::likelihood::seminar_prob;
use biprobit_core::numeric::Correlation;
use biprobit_core::query::{prob_ratio, Coefficients, Equation};
use biprobit_core::report::FitReport;
use biprobit_core::simulate::{simulate, SimConfig};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// P(seminar) on an `n` x `n` grid of invite and accept indices spanning
/// [-3, 3], row-major with the invite index varying slowest.
#[wasm_bindgen]
pub fn seminar_surface(rho: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    let r = Correlation::new(rho).map_err(js)?;
    let step = if n > 1 { 6.0 / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = seminar_prob(-3.0 + step * i as f64, -3.0 + step * j as f64, r).map_err(js)?;
            out.push(p.get());
        }
    }
    Ok(out)
}

/// Ratio of predicted probabilities. Coefficients and both covariate sets
/// are JSON objects; returns a JSON `{baseline, counterfactual, ratio}`.
#[wasm_bindgen]
pub fn probability_ratio(
    coefficients: &str,
    equation: &str,
    baseline: &str,
    counterfactual: &str,
) -> Result<String, JsValue> {
    let c: Coefficients = serde_json::from_str(coefficients).map_err(js)?;
    let eq: Equation = equation.parse().map_err(js)?;
    let x0: BTreeMap<String, f64> = serde_json::from_str(baseline).map_err(js)?;
    let mut x1 = x0.clone();
    x1.extend(serde_json::from_str::<BTreeMap<String, f64>>(counterfactual).map_err(js)?);
    let r = prob_ratio(eq, &x0, &x1, &c).map_err(js)?;
    serde_json::to_string(&r).map_err(js)
}

/// Simulates a small market with the default coefficients and fits it.
/// Returns the coefficient table with the rho = 0 likelihood-ratio test.
#[wasm_bindgen]
pub fn simulate_and_fit(n_scholars: usize, rho: f64, seed: u64) -> Result<String, JsValue> {
    let mut cfg = SimConfig {
        n_departments: 60,
        n_sampled_departments: 20,
        n_scholars,
        true_rho: Correlation::new(rho).map_err(js)?,
        seed,
        ..SimConfig::default()
    };
    cfg.fit.n_starts = 2;
    cfg.validate().map_err(js)?;
    let out = simulate(&cfg).map_err(js)?;
    let fit = fit_biprobit_partial(&out.design, &cfg.fit).map_err(js)?;
    let mut report = FitReport::new(&fit, &out.design, &cfg.fit).map_err(js)?;
    if fit.converged {
        let fixed = FitOptions { fix_rho_at_zero: true, ..cfg.fit.clone() };
        let restricted = fit_biprobit_partial(&out.design, &fixed).map_err(js)?;
        report.lr_test_rho = Some(lr_test_rho(&fit, &restricted).map_err(js)?);
    }
    Ok(format!(
        "{} dyads, {} seminars, true rho {rho}\n\n{}",
        out.design.n_obs(),
        out.design.z.iter().filter(|&&z| z > 0.0).count(),
        report.to_table()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_corners() {
        let s = seminar_surface(0.0, 3).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s[0] < 1e-5 && s[8] > 0.997);
        assert!((s[4] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ratio_json() {
        let c = r#"{"beta_invite": {"quality": 1.0, "intercept": -3.0}, "beta_accept": {"intercept": 0.0}, "rho": 0.0}"#;
        let out = probability_ratio(c, "invite", r#"{"quality": 0}"#, r#"{"quality": 1}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["ratio"].as_f64().unwrap() - 16.853_222_550_970_655).abs() < 1e-9);
    }

    #[test]
    fn small_fit_runs() {
        let table = simulate_and_fit(600, 0.3, 1).unwrap();
        assert!(table.contains("Test rho=0"));
    }
}
