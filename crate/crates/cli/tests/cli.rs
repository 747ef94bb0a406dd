use std::path::Path;

use biprobit_cli::run;
use biprobit_core::data::{build_design, read_dyads};
use biprobit_core::estimator::{fit_biprobit_partial, FitOptions};
use biprobit_core::report::FitReport;
use biprobit_core::simulate::{simulate, SimConfig};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("biprobit").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = SimConfig {
        n_departments: 30,
        n_sampled_departments: 8,
        n_scholars: 500,
        seed: 42,
        ..SimConfig::default()
    };
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(call(&["fit", "--bogus"]).0, 1);
    assert_eq!(call(&["frobnicate"]).0, 1);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
    let (code, _, err) = call(&["lrtest", "--unrestricted", "/nonexistent/a.json", "--restricted", "/nonexistent/b.json"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/a.json"));
}

#[test]
fn simulate_build_fit_lrtest_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sim = dir.path().join("sim");
    let (code, out, err) = call(&["simulate", "--config", p(&cfg), "--out", p(&sim)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("dyads"));

    let dyads = dir.path().join("dyads.csv");
    let (code, out, err) = call(&[
        "build",
        "--departments",
        p(&sim.join("departments.csv")),
        "--scholars",
        p(&sim.join("scholars.csv")),
        "--seminars",
        p(&sim.join("seminars.csv")),
        "--out",
        p(&dyads),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("own-department pairs excluded"));
    assert_eq!(std::fs::read(&dyads).unwrap(), std::fs::read(sim.join("dyads.csv")).unwrap());

    let spec = sim.join("spec.json");
    let fu = dir.path().join("u.json");
    let fr = dir.path().join("r.json");
    let base = ["fit", "--design", p(&dyads), "--spec", p(&spec), "--seed", "3", "--starts", "2"];
    let (code, table, err) = call(&[&base[..], &["--biprobit", "--out", p(&fu)]].concat());
    assert_eq!(code, 0, "{err}");
    assert!(table.contains("Test rho=0"));
    let (code, _, err) = call(&[&base[..], &["--fix-rho", "--out", p(&fr)]].concat());
    assert_eq!(code, 0, "{err}");

    // The file round trip must not change the likelihood.
    let cfg_v: SimConfig = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let direct = simulate(&cfg_v).unwrap();
    let opts = FitOptions { n_starts: 2, seed: 3, ..FitOptions::default() };
    let in_memory = fit_biprobit_partial(&direct.design, &opts).unwrap();
    let report = FitReport::from_json(&std::fs::read_to_string(&fu).unwrap()).unwrap();
    assert!((report.loglik - in_memory.loglik).abs() <= 1e-10 * in_memory.loglik.abs().max(1.0));
    let from_file = read_dyads(std::fs::File::open(&dyads).unwrap(), "dyads").unwrap();
    assert_eq!(build_design(&from_file, &cfg_v.design, true).unwrap(), direct.design);

    let (code, out, _) = call(&["lrtest", "--unrestricted", p(&fu), "--restricted", p(&fr)]);
    assert_eq!(code, 0);
    let lr: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(lr["statistic"].as_f64().unwrap(), report.lr_test_rho.unwrap().statistic);

    let (code, _, err) = call(&["lrtest", "--unrestricted", p(&fr), "--restricted", p(&fu)]);
    assert_eq!(code, 1);
    if report.lr_test_rho.unwrap().statistic > 1e-3 {
        assert!(err.contains("restricted loglik exceeds unrestricted"), "{err}");
    }

    let (code, out, _) = call(&[
        "predict", "--params", p(&fu), "--equation", "seminar", "--set", "affiliation_quality=0.5",
        "--set", "dept_size=0", "--set", "female=0", "--set", "distance=-1", "--set", "dept_quality=1",
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("seminar probability: 0."));
    let (code, _, err) = call(&["predict", "--params", p(&fu), "--equation", "invite", "--set", "shoe_size=3"]);
    assert_eq!(code, 1);
    assert!(err.contains("shoe_size"));
}

#[test]
fn ratio_against_truth_file() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"beta_invite": {"quality": 1.0, "intercept": -3.0}, "beta_accept": {"size": 0.5, "intercept": 0.0}, "rho": 0.2}"#,
    )
    .unwrap();
    let (code, out, err) = call(&[
        "ratio", "--params", p(&params), "--equation", "invite", "--set", "quality=0",
        "--counterfactual", "quality=1",
    ]);
    assert_eq!(code, 0, "{err}");
    let ratio: f64 = out.lines().last().unwrap().trim_start_matches("ratio: ").parse().unwrap();
    assert!((ratio - 16.853_222_550_970_655).abs() < 1e-9);
    let (code, out, _) = call(&["ratio", "--params", p(&params), "--equation", "invite", "--set", "quality=0"]);
    assert_eq!(code, 0);
    assert!(out.ends_with("ratio: 1\n"));
    let (code, _, err) = call(&["ratio", "--params", p(&params), "--equation", "invite", "--set", "quality=-9", "--counterfactual", "quality=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("rescale"));
    let (code, _, _) = call(&["predict", "--params", p(&params), "--equation", "bogus"]);
    assert_eq!(code, 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sim = dir.path().join("sim");
    assert_eq!(call(&["simulate", "--config", p(&cfg), "--out", p(&sim)]).0, 0);
    let out = dir.path().join("fit.json");
    let (code, _, err) = call(&[
        "fit", "--design", p(&sim.join("dyads.csv")), "--spec", p(&sim.join("spec.json")), "--starts", "2",
        "--max-iterations", "1", "--out", p(&out),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("no start converged"));
    let report = FitReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!report.converged);
    assert_eq!(report.start_log.len(), 2);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"female_share": 2.0}"#).unwrap();
    let (code, _, err) = call(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("female_share"), "{err}");
    std::fs::write(&cfg, r#"{"n_scholarz": 5}"#).unwrap();
    let (code, _, err) = call(&["mc", "--config", p(&cfg), "--reps", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("n_scholarz"), "{err}");
}
