//! Lifetime-map determinism, file formats and photon budgets.

use fretsim::config::RunConfig;
use fretsim::fit::GateSpec;
use fretsim::flim::*;
use fretsim::sim::*;

fn small_cube(seed: u64) -> FlimCube {
    let cfg = RunConfig::default();
    let mut scene = cfg.scene().unwrap();
    scene.width_px = 10;
    scene.height_px = 8;
    scene.photons_per_pixel = 3e3;
    scene.flakes = vec![vec![[100.0, 750.0], [900.0, 750.0], [500.0, 50.0]]];
    simulate_flim_cube(
        &scene,
        &cfg.params().unwrap(),
        &cfg.depth().unwrap(),
        &cfg.irf().unwrap(),
        &cfg.grid().unwrap(),
        seed,
    )
    .unwrap()
}

fn map_with_threads(cube: &FlimCube, threads: usize) -> LifetimeMap {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| fit_flim_cube(cube, &GateSpec::default(), &IrfSpec::measured_setup(), 100).unwrap())
}

#[test]
fn map_is_identical_for_any_worker_count() {
    let cube = small_cube(4);
    let one = map_with_threads(&cube, 1);
    for threads in [2, 5] {
        let many = map_with_threads(&cube, threads);
        assert_eq!(one, many);
        assert_eq!(one.to_csv(), many.to_csv());
    }
}

#[test]
fn map_csv_layout() {
    let map = map_with_threads(&small_cube(5), 1);
    let text = map.to_csv();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row,col,class,tau_slow_ns,tau_slow_sigma,tau_fast_ns,tau_fast_sigma,counts,goodness,tau_mean_ns"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 80);
    for (i, f) in rows.iter().enumerate() {
        assert_eq!(f.len(), 10);
        assert_eq!(
            (f[0].parse::<usize>().unwrap(), f[1].parse::<usize>().unwrap()),
            (i / 10, i % 10)
        );
        match f[2] {
            "on-flake" => assert!(!f[5].is_empty() && !f[3].is_empty()),
            "off-flake" => assert!(f[5].is_empty() && f[6].is_empty() && !f[3].is_empty()),
            "low-signal" => assert!(f[3..7].iter().all(|s| s.is_empty())),
            other => panic!("class {other}"),
        }
    }
    assert!(map.count(PixelClass::OnFlake) > 0 && map.count(PixelClass::OffFlake) > 0);
    let back = LifetimeMap::from_csv(&text, map.pixel_size_nm).unwrap();
    assert_eq!(back.to_csv(), text);
}

#[test]
fn fast_lifetime_is_below_slow_wherever_both_exist() {
    let map = map_with_threads(&small_cube(6), 1);
    for r in &map.records {
        if let (Some(f), Some(s)) = (r.tau_fast, r.tau_slow) {
            assert!(f.value < s.value);
        }
    }
}

#[test]
fn cube_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cube = small_cube(7);
    let stem = dir.path().join("scan");
    cube.write(&stem).unwrap();
    assert_eq!(FlimCube::read(&stem).unwrap(), cube);
    assert_eq!(FlimCube::read(dir.path().join("scan.bin")).unwrap(), cube);

    // a truncated payload no longer matches the header
    let bin = dir.path().join("scan.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(FlimCube::read(&stem), Err(fretsim::Error::Format(_))));
}

#[test]
fn histogram_csv_round_trip() {
    let grid = TimeGrid::tcspc_default();
    let curve = irf_convolve(&mono_exponential(&grid, 5.0).unwrap(), &IrfSpec::measured_setup()).unwrap();
    let h = sample_histogram(&curve, 1e4, 1).unwrap();
    let text = h.to_csv().unwrap();
    assert!(text.starts_with("time_ps,counts\n-4096,"));
    assert_eq!(TcspcHistogram::from_csv(&text).unwrap(), h);
}

#[test]
fn dwell_times() {
    assert!((photon_budget(70_000.0, 1000.0).unwrap() * 1e3 - 14.285_714).abs() < 1e-6);
    assert!((photon_budget(1e6, 1000.0).unwrap() - 1e-3).abs() < 1e-15);
    assert!(matches!(photon_budget(0.0, 1000.0), Err(fretsim::Error::Domain(_))));
}

#[test]
fn photon_ladder_scales_as_inverse_square() {
    let ten = empirical_min_photons(&MinPhotonsSpec::new(12.0, 0.10, 1)).unwrap();
    let one = empirical_min_photons(&MinPhotonsSpec::new(12.0, 0.01, 1)).unwrap();
    println!("10 %: {} photons, 1 %: {} photons", ten.photons, one.photons);
    assert!((100..=10_000).contains(&ten.photons), "{}", ten.photons);
    let ratio = one.photons as f64 / ten.photons as f64;
    assert!((50.0..=200.0).contains(&ratio), "ratio {ratio}");
}
