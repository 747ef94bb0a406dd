use std::collections::BTreeMap;

use biprobit_core::data::{career_age, haversine_km};
use biprobit_core::likelihood::seminar_prob;
use biprobit_core::numeric::{bvn_cdf, chi_square_sf, std_normal_cdf, std_normal_quantile, Correlation};
use biprobit_core::query::{predict, prob_ratio, Coefficients, Equation};
use proptest::prelude::*;

fn corr(r: f64) -> Correlation {
    Correlation::new(r).unwrap()
}

proptest! {
    #[test]
    fn bvn_is_symmetric_in_its_arguments(a in -6.0..6.0f64, b in -6.0..6.0f64, r in -0.99..0.99f64) {
        let ab = bvn_cdf(a, b, corr(r)).unwrap().get();
        let ba = bvn_cdf(b, a, corr(r)).unwrap().get();
        prop_assert!((ab - ba).abs() <= 1e-15);
    }

    #[test]
    fn bvn_respects_frechet_bounds(a in -6.0..6.0f64, b in -6.0..6.0f64, r in -0.999..0.999f64) {
        let p = bvn_cdf(a, b, corr(r)).unwrap().get();
        let pa = std_normal_cdf(a).unwrap().get();
        let pb = std_normal_cdf(b).unwrap().get();
        prop_assert!(p >= (pa + pb - 1.0).max(0.0) - 1e-14);
        prop_assert!(p <= pa.min(pb) + 1e-14);
    }

    #[test]
    fn bvn_reflection_identity(a in -5.0..5.0f64, b in -5.0..5.0f64, r in -0.99..0.99f64) {
        // Φ₂(a, b; ρ) + Φ₂(a, -b; -ρ) = Φ(a)
        let lhs = bvn_cdf(a, b, corr(r)).unwrap().get() + bvn_cdf(a, -b, corr(-r)).unwrap().get();
        prop_assert!((lhs - std_normal_cdf(a).unwrap().get()).abs() <= 1e-13);
    }

    #[test]
    fn bvn_increases_with_rho(a in -4.0..4.0f64, b in -4.0..4.0f64, r in -0.95..0.9f64) {
        let lo = bvn_cdf(a, b, corr(r)).unwrap().get();
        let hi = bvn_cdf(a, b, corr(r + 0.05)).unwrap().get();
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-10..(1.0 - 1e-10f64)) {
        let x = std_normal_quantile(p).unwrap();
        let back = std_normal_cdf(x).unwrap().get();
        prop_assert!((back - p).abs() <= 1e-12 * p.min(1.0 - p).max(1e-3));
    }

    #[test]
    fn haversine_is_a_symmetric_metric(
        la1 in -90.0..90.0f64, lo1 in -180.0..180.0f64,
        la2 in -90.0..90.0f64, lo2 in -180.0..180.0f64,
        la3 in -90.0..90.0f64, lo3 in -180.0..180.0f64,
    ) {
        let d12 = haversine_km(la1, lo1, la2, lo2).unwrap();
        prop_assert_eq!(d12, haversine_km(la2, lo2, la1, lo1).unwrap());
        prop_assert!((0.0..=std::f64::consts::PI * 6371.0088 + 1e-6).contains(&d12));
        let d13 = haversine_km(la1, lo1, la3, lo3).unwrap();
        let d23 = haversine_km(la2, lo2, la3, lo3).unwrap();
        prop_assert!(d13 <= d12 + d23 + 1e-6);
    }

    #[test]
    fn career_age_counts_inclusive_years(first in 1900..2018i32) {
        prop_assert_eq!(career_age(first, 2018).unwrap(), (2018 - first + 1) as u32);
    }

    #[test]
    fn seminar_probability_is_below_each_margin(xi in -5.0..5.0f64, xa in -5.0..5.0f64, r in -0.99..0.99f64) {
        let p = seminar_prob(xi, xa, corr(r)).unwrap().get();
        prop_assert!(p <= std_normal_cdf(xi).unwrap().get() + 1e-15);
        prop_assert!(p <= std_normal_cdf(xa).unwrap().get() + 1e-15);
    }

    #[test]
    fn chi_square_sf_is_decreasing(x in 0.0..50.0f64, dx in 1e-3..5.0f64) {
        prop_assert!(chi_square_sf(x + dx, 1).unwrap() <= chi_square_sf(x, 1).unwrap());
    }

    #[test]
    fn identity_counterfactual_has_ratio_one(q in -3.0..3.0f64, b in -2.0..2.0f64) {
        let c = Coefficients {
            beta_invite: BTreeMap::from([("q".to_string(), b), ("intercept".to_string(), -0.5)]),
            beta_accept: BTreeMap::from([("intercept".to_string(), 0.3)]),
            rho: corr(0.2),
        };
        let x = BTreeMap::from([("q".to_string(), q)]);
        let r = prob_ratio(Equation::Seminar, &x, &x, &c).unwrap();
        prop_assert_eq!(r.ratio, 1.0);
        prop_assert_eq!(r.baseline, predict(Equation::Seminar, &x, &c).unwrap().get());
    }
}
