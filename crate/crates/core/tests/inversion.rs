//! End-to-end radius recovery and calibration-curve stability.

use fretsim::fit::{effective_lifetime, GateSpec};
use fretsim::inversion::*;
use fretsim::sim::*;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn default_curve() -> RadiusCurve {
    tau_eff_curve(
        DEFAULT_R_MIN_NM,
        DEFAULT_R_MAX_NM,
        DEFAULT_POINTS,
        &CurveSettings::nv_wse2().unwrap(),
    )
    .unwrap()
}

#[test]
fn simulate_fit_invert_round_trip() {
    let s = CurveSettings::nv_wse2().unwrap();
    let curve = default_curve();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..10 {
        let r = 6.0 + 22.0 * (rng.next_u64() as f64 / u64::MAX as f64);
        let p = s.params.with_radius(r);
        let model = irf_convolve(&ensemble_decay(&p, &s.depth, &s.grid).unwrap(), &s.irf).unwrap();
        let h = sample_histogram(&model, 1e6, 100 + k).unwrap();
        let tau = effective_lifetime(&h, &GateSpec::default(), None).unwrap();
        let got = invert_radius(tau.value, tau.sigma, &curve).unwrap();
        let rel = (got.value - r) / r;
        assert!(
            rel.abs() < 0.05,
            "R={r:.2}: τ_eff {:.4} → {:.2} ± {:.2} ({rel:+.3})",
            tau.value,
            got.value,
            got.sigma
        );
    }
}

#[test]
fn larger_lifetime_means_smaller_radius() {
    let curve = default_curve();
    let (lo, hi) = curve.tau_range();
    let radii: Vec<f64> = (0..=40)
        .map(|i| {
            invert_radius(lo + (hi - lo) * i as f64 / 40.0, 0.0, &curve)
                .unwrap()
                .value
        })
        .collect();
    assert!(radii.windows(2).all(|w| w[1] < w[0]), "{radii:?}");
}

#[test]
fn doubling_curve_density_barely_moves_inversions() {
    let s = CurveSettings::nv_wse2().unwrap();
    let coarse = default_curve();
    let fine = tau_eff_curve(DEFAULT_R_MIN_NM, DEFAULT_R_MAX_NM, 2 * DEFAULT_POINTS - 1, &s).unwrap();
    let (lo, hi) = coarse.tau_range();
    for i in 0..=50 {
        let tau = lo + (hi - lo) * i as f64 / 50.0;
        let a = invert_radius(tau, 0.0, &coarse).unwrap().value;
        let b = invert_radius(tau, 0.0, &fine).unwrap().value;
        assert!((a - b).abs() < 0.005 * b, "τ={tau}: {a} vs {b}");
    }
}

#[test]
fn out_of_range_lifetime_is_a_range_error() {
    let curve = default_curve();
    let (lo, hi) = curve.tau_range();
    for tau in [0.5 * lo, 1.01 * hi] {
        match invert_radius(tau, 0.1, &curve) {
            Err(fretsim::Error::Range { min, max, .. }) => assert_eq!((min, max), (lo, hi)),
            other => panic!("{other:?}"),
        }
    }
}
