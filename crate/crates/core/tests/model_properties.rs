//! Property tests of the single-donor quenching law.

use fretsim::model::*;
use proptest::prelude::*;

fn params(r: f64, tau_b: f64, n: DistanceExponent) -> ModelParams {
    ModelParams {
        foerster_radius_nm: r,
        bulk_lifetime_ns: tau_b,
        distance_exponent: n,
        ..ModelParams::nv_wse2()
    }
}

fn exponent() -> impl Strategy<Value = DistanceExponent> {
    prop_oneof![Just(DistanceExponent::Sheet), Just(DistanceExponent::Point)]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lifetime_is_bulk_times_one_minus_efficiency(
        r in 0.5f64..50.0, tau_b in 0.5f64..50.0, z in 0.1f64..200.0, n in exponent()
    ) {
        let p = params(r, tau_b, n);
        let tau = quenched_lifetime(z, &p).unwrap();
        let e = fret_efficiency(z, &p).unwrap();
        // 1 − E cancels when quenching is strong, so the scale is τ_bulk
        prop_assert!((tau - tau_b * (1.0 - e)).abs() <= 1e-12 * tau_b);
    }

    #[test]
    fn intensity_and_efficiency_sum_to_one(r in 0.5f64..50.0, z in 0.1f64..200.0, n in exponent()) {
        let p = params(r, 12.0, n);
        let i = quenched_intensity(z, &p).unwrap() / p.unquenched_intensity;
        let e = fret_efficiency(z, &p).unwrap();
        prop_assert!((i + e - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn monotone_in_depth(r in 0.5f64..50.0, z in 0.2f64..100.0, dz in 0.01f64..5.0, n in exponent()) {
        let p = params(r, 12.0, n);
        prop_assert!(quenched_lifetime(z + dz, &p).unwrap() > quenched_lifetime(z, &p).unwrap());
        prop_assert!(fret_efficiency(z + dz, &p).unwrap() < fret_efficiency(z, &p).unwrap());
    }

    #[test]
    fn point_and_sheet_rates_meet_at_r(r in 0.5f64..50.0, beyond in 1.001f64..10.0) {
        let sheet = params(r, 12.0, DistanceExponent::Sheet);
        let point = params(r, 12.0, DistanceExponent::Point);
        let at = |p: &ModelParams, z| nonradiative_rate(z, p).unwrap();
        prop_assert!((at(&sheet, r) - at(&point, r)).abs() <= 1e-15 * at(&sheet, r));
        prop_assert!((at(&sheet, r) - sheet.radiative_rate()).abs() <= 1e-15);
        prop_assert!(at(&point, r * beyond) < at(&sheet, r * beyond));
    }

    #[test]
    fn depth_inverse_round_trips(r in 1.0f64..40.0, z in 0.5f64..100.0, n in exponent()) {
        let p = params(r, 12.0, n);
        let tau = quenched_lifetime(z, &p).unwrap();
        prop_assume!(tau < 12.0 * (1.0 - 1e-9));
        let back = depth_for_lifetime(tau, &p).unwrap();
        prop_assert!((back - z).abs() <= 1e-7 * z, "{back} vs {z}");
    }
}

#[test]
fn nonpositive_depth_is_a_domain_error() {
    let p = ModelParams::nv_wse2();
    assert!(quenched_lifetime(0.0, &p).is_err());
    assert!(fret_efficiency(-1.0, &p).is_err());
}
