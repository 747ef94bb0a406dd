use super::*;
use crate::likelihood::seminar_prob;
use crate::oracle;

fn zero_truth(rho: f64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.true_beta_invite.values_mut().for_each(|b| *b = 0.0);
    cfg.true_beta_accept.values_mut().for_each(|b| *b = 0.0);
    cfg.true_rho = Correlation::new(rho).unwrap();
    cfg
}

fn small() -> SimConfig {
    SimConfig {
        n_departments: 40,
        n_sampled_departments: 10,
        n_scholars: 300,
        ..SimConfig::default()
    }
}

#[test]
fn rejects_invalid_configs() {
    let cases = [
        SimConfig { n_departments: 0, ..SimConfig::default() },
        SimConfig { female_share: 1.5, ..SimConfig::default() },
        SimConfig { n_sampled_departments: 241, ..SimConfig::default() },
        SimConfig { dept_size: IntRange { min: 2, max: 10 }, ..SimConfig::default() },
        SimConfig { quality: LogNormalParams { mu: 0.0, sigma: -1.0 }, ..SimConfig::default() },
    ];
    for cfg in cases {
        assert!(gen_population(&cfg).is_err());
    }
    let mut cfg = SimConfig::default();
    cfg.true_beta_invite.remove("female");
    assert!(cfg.validate().unwrap_err().to_string().contains("true_beta_invite"));
    let mut cfg = SimConfig::default();
    cfg.design.accept = cfg.design.invite.clone();
    assert!(matches!(cfg.validate(), Err(Error::ExclusionRestriction(_))));
}

#[test]
fn config_json_round_trip() {
    let cfg = SimConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
    let partial = SimConfig::from_json(r#"{"n_scholars": 100, "seed": 5}"#).unwrap();
    assert_eq!(partial.n_scholars, 100);
    assert_eq!(partial.n_departments, 240);
    assert!(SimConfig::from_json(r#"{"n_scholar": 100}"#).is_err());
}

#[test]
fn female_share_matches_calibration() {
    let cfg = SimConfig { n_scholars: 10_000, ..SimConfig::default() };
    let pop = gen_population(&cfg).unwrap();
    let share = pop.scholars.iter().filter(|s| s.female).count() as f64 / 10_000.0;
    assert!((0.21..=0.25).contains(&share), "{share}");
}

#[test]
fn population_is_deterministic_and_valid() {
    let cfg = small();
    let a = gen_population(&cfg).unwrap();
    assert_eq!(a, gen_population(&cfg).unwrap());
    assert_ne!(a, gen_population(&SimConfig { seed: 1, ..cfg.clone() }).unwrap());
    for d in &a.departments {
        assert!(d.quality_index > 0.0 && (5..=60).contains(&d.n_professors));
    }
    for s in &a.scholars {
        let age = cfg.reference_year - s.first_pub_year.unwrap() + 1;
        assert!((1..=40).contains(&age));
    }
}

fn mean_z(out: &SimOutput) -> f64 {
    out.design.z.iter().sum::<f64>() / out.design.n_obs() as f64
}

#[test]
fn null_coefficients_give_orthant_probabilities() {
    for (rho, expected) in [(0.0, 0.25), (0.5, oracle::bvn_cdf(0.0, 0.0, 0.5))] {
        let cfg = SimConfig {
            n_sampled_departments: 20,
            n_scholars: 5_100,
            ..zero_truth(rho)
        };
        let out = simulate(&cfg).unwrap();
        let n = out.design.n_obs() as f64;
        assert!(n >= 100_000.0);
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!((mean_z(&out) - expected).abs() < 3.0 * se, "rho {rho}: {}", mean_z(&out));
    }
}

#[test]
fn outcome_is_product_of_latent_decisions() {
    let out = simulate(&small()).unwrap();
    for (d, l) in out.dyads.iter().zip(&out.latent) {
        assert_eq!(d.z, u8::from(l.invite && l.accept));
    }
    assert_eq!(out.seminars.len(), out.dyads.iter().filter(|d| d.z == 1).count());
    assert_eq!(out.design.z.iter().filter(|&&z| z == 1.0).count(), out.seminars.len());
}

#[test]
fn cell_frequencies_match_model_probabilities() {
    let cfg = SimConfig { n_sampled_departments: 30, n_scholars: 4_000, ..SimConfig::default() };
    let out = simulate(&cfg).unwrap();
    let d = &out.design;
    let truth = cfg.truth();
    let bi: Vec<f64> = d.invite_names.iter().map(|n| truth.beta_invite[n]).collect();
    let ba: Vec<f64> = d.accept_names.iter().map(|n| truth.beta_accept[n]).collect();
    let fem = d.invite_names.iter().position(|n| n == "female").unwrap();
    let dist = d.invite_names.iter().position(|n| n == "distance").unwrap();
    let mut cells = [[(0.0, 0.0, 0.0, 0usize); 2]; 2];
    for i in 0..d.n_obs() {
        let a: f64 = (0..bi.len()).map(|j| d.x_invite[(i, j)] * bi[j]).sum();
        let b: f64 = (0..ba.len()).map(|j| d.x_accept[(i, j)] * ba[j]).sum();
        let p = seminar_prob(a, b, truth.rho).unwrap().get();
        let c = &mut cells[usize::from(d.x_invite[(i, fem)] == 1.0)][usize::from(d.x_invite[(i, dist)] > 0.0)];
        c.0 += d.z[i];
        c.1 += p;
        c.2 += p * (1.0 - p);
        c.3 += 1;
    }
    for c in cells.iter().flatten() {
        assert!(c.3 > 1000);
        assert!((c.0 - c.1).abs() < 3.5 * c.2.sqrt(), "{c:?}");
    }
}

#[test]
fn shock_correlation_converges() {
    let cfg = SimConfig {
        n_departments: 60,
        n_sampled_departments: 50,
        n_scholars: 20_400,
        ..SimConfig::default()
    };
    let out = simulate(&cfg).unwrap();
    let n = out.latent.len() as f64;
    assert!(n >= 1e6);
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in &out.latent {
        s1 += l.shock_invite;
        s2 += l.shock_accept;
        s11 += l.shock_invite * l.shock_invite;
        s22 += l.shock_accept * l.shock_accept;
        s12 += l.shock_invite * l.shock_accept;
    }
    let cov = s12 / n - s1 / n * s2 / n;
    let r = cov / ((s11 / n - (s1 / n).powi(2)) * (s22 / n - (s2 / n).powi(2))).sqrt();
    assert!((r - 0.3).abs() < 3.0 / n.sqrt(), "{r}");
}

#[test]
fn growing_the_roster_keeps_existing_draws() {
    let cfg = small();
    let big = SimConfig { n_scholars: 600, ..cfg.clone() };
    let a = simulate(&cfg).unwrap();
    let b = simulate(&big).unwrap();
    assert_eq!(gen_population(&cfg).unwrap().scholars[..], gen_population(&big).unwrap().scholars[..300]);
    let shocks: HashMap<(String, String), LatentDraw> = b
        .dyads
        .iter()
        .zip(&b.latent)
        .map(|(d, l)| ((d.dept_id.clone(), d.scholar_id.clone()), *l))
        .collect();
    for (d, l) in a.dyads.iter().zip(&a.latent) {
        let m = shocks[&(d.dept_id.clone(), d.scholar_id.clone())];
        assert_eq!((l.shock_invite, l.shock_accept), (m.shock_invite, m.shock_accept));
    }
}

#[test]
fn output_round_trips_through_csv() {
    let cfg = small();
    let out = simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_output(dir.path(), &out, &cfg).unwrap();
    let mut depts = crate::data::load_departments(dir.path().join("departments.csv")).unwrap();
    let mut scholars = crate::data::load_scholars(dir.path().join("scholars.csv"), cfg.reference_year).unwrap();
    let seminars = crate::data::load_seminars(dir.path().join("seminars.csv")).unwrap();
    assert!(depts.rejected.is_empty() && scholars.rejected.is_empty());
    mark_activity(&mut depts.records, &mut scholars.records, &seminars);
    assert_eq!(depts.records, out.departments);
    assert_eq!(scholars.records, out.scholars);
    let rebuilt = build_dyads(&depts.records, &scholars.records, &seminars, cfg.reference_year).unwrap();
    assert_eq!(rebuilt.dyads, out.dyads);
    let truth: Coefficients =
        serde_json::from_str(&fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth, cfg.truth());
}

#[test]
fn single_replication_flags_degenerate_se() {
    let cfg = SimConfig { n_sampled_departments: 10, n_scholars: 800, ..SimConfig::default() };
    let rep = monte_carlo(&cfg, 1, &cfg.fit).unwrap();
    assert_eq!(rep.n_replications, 1);
    assert!(rep.degenerate_mc_se);
    assert_eq!(rep.parameters.len(), 10);
    assert!(rep.parameters.iter().all(|p| p.mc_se == 0.0 && p.rmse.is_finite()));
    assert!(monte_carlo(&cfg, 0, &cfg.fit).is_err());
    let mut bad = cfg.clone();
    bad.design.accept = bad.design.invite.clone();
    assert!(matches!(monte_carlo(&bad, 2, &cfg.fit), Err(Error::ExclusionRestriction(_))));
}
