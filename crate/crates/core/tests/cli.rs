//! Black-box tests of the `fretsim` binary.

use fretsim::fit::ExpComponent;
use fretsim::flim::FlimCube;
use fretsim::sim::*;
use std::path::Path;
use std::process::{Command, Output};

fn fretsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fretsim"))
        .current_dir(dir)
        .arg("--no-plots")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    stdout(&o)
}

#[test]
fn budget_prints_milliseconds() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(fretsim(dir.path(), &["budget", "70000", "1000"])), "14.29 ms\n");
    let bad = fretsim(dir.path(), &["budget", "0", "1000"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let full = ok(fretsim(dir.path(), &["--dump-config"]));
    let cut: String = full
        .lines()
        .filter(|l| !l.starts_with("bulk_lifetime_ns"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(dir.path().join("run.toml"), cut).unwrap();
    let o = fretsim(dir.path(), &["--config", "run.toml", "simulate-decay"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bulk_lifetime_ns"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let full = ok(fretsim(dir.path(), &["--dump-config"]));
    std::fs::write(
        dir.path().join("run.toml"),
        full.replace("[irf]\n", "[irf]\nwobble = 1\n"),
    )
    .unwrap();
    let o = fretsim(dir.path(), &["--config", "run.toml", "tau-curve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wobble"), "{}", stderr(&o));
}

#[test]
fn dumped_config_reloads_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let first = ok(fretsim(d, &["--seed", "9", "--out", "a", "--dump-config"]));
    std::fs::write(d.join("run.toml"), &first).unwrap();
    assert_eq!(ok(fretsim(d, &["--config", "run.toml", "--dump-config"])), first);

    ok(fretsim(
        d,
        &["--seed", "9", "--out", "a", "simulate-decay", "--photons", "1e5"],
    ));
    ok(fretsim(
        d,
        &[
            "--config",
            "run.toml",
            "--out",
            "b",
            "simulate-decay",
            "--photons",
            "1e5",
        ],
    ));
    assert_eq!(
        std::fs::read(d.join("a/decay.csv")).unwrap(),
        std::fs::read(d.join("b/decay.csv")).unwrap()
    );
}

#[test]
fn simulated_decay_files_ignore_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(fretsim(d, &["--threads", "1", "--out", "one", "simulate-decay"]));
    ok(fretsim(d, &["--threads", "3", "--out", "three", "simulate-decay"]));
    let a = std::fs::read_to_string(d.join("one/decay.csv")).unwrap();
    assert!(a.starts_with("time_ps,counts\n"));
    assert_eq!(a, std::fs::read_to_string(d.join("three/decay.csv")).unwrap());
}

#[test]
fn unquenched_decay_fits_to_bulk_lifetime() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(fretsim(d, &["simulate-decay", "--radius", "0", "--donor-only"]));
    let report = ok(fretsim(d, &["fit-decay", "out/decay.csv", "--components", "1"]));
    let fit = std::fs::read_to_string(d.join("out/fit.csv")).unwrap();
    let tau: f64 = fit
        .lines()
        .find(|l| l.starts_with("lifetime_1_ns"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((tau - 12.0).abs() < 0.02 * 12.0, "{report}");
}

#[test]
fn two_component_file_is_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid = TimeGrid::tcspc_default();
    let irf = IrfSpec::measured_setup();
    let values: Vec<f64> = (0..grid.n_bins)
        .map(|i| {
            let t = grid.center_ns(i);
            [(4.0, 0.42), (1.0, 5.1)]
                .iter()
                .map(|&(a, tau)| fretsim::fit::exp_gauss_model(t, &ExpComponent::new(a, tau).unwrap(), &irf, 0.0))
                .sum::<f64>()
        })
        .collect();
    let h = sample_histogram(&DecayCurve::new(grid, values).unwrap(), 1e6, 3).unwrap();
    h.write_csv(d.join("biexp.csv")).unwrap();
    ok(fretsim(d, &["fit-decay", "biexp.csv"]));
    let fit = std::fs::read_to_string(d.join("out/fit.csv")).unwrap();
    let get = |key: &str| -> f64 {
        fit.lines()
            .find(|l| l.starts_with(key))
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("lifetime_1_ns") / 0.42 - 1.0).abs() < 0.05);
    assert!((get("lifetime_2_ns") / 5.1 - 1.0).abs() < 0.05);
}

#[test]
fn fit_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = fretsim(d, &["fit-decay", "nope.csv"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("nope.csv"));

    ok(fretsim(d, &["simulate-decay", "--photons", "1e4"]));
    let three = fretsim(d, &["fit-decay", "out/decay.csv", "--components", "3"]);
    assert_eq!(three.status.code(), Some(2));

    std::fs::write(d.join("garbage.csv"), "time_ps,counts\n0,1\n32,x\n").unwrap();
    assert_eq!(fretsim(d, &["fit-decay", "garbage.csv"]).status.code(), Some(3));
}

#[test]
fn inversion_reports_radius_and_rejects_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(fretsim(d, &["tau-curve"]));
    let curve = std::fs::read_to_string(d.join("out/tau_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("r_nm,tau_eff_ns"));
    let rows: Vec<(String, String)> = lines
        .map(|l| {
            let (r, t) = l.split_once(',').unwrap();
            (r.to_string(), t.to_string())
        })
        .collect();
    assert_eq!(rows.len(), 26);

    // a tabulated value maps back to its own radius
    let (r, tau) = &rows[8];
    let text = ok(fretsim(d, &["invert-radius", tau, "--curve", "out/tau_curve.csv"]));
    let got: f64 = text
        .trim_start_matches("R = ")
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((got / r.parse::<f64>().unwrap() - 1.0).abs() < 0.01, "{text}");

    let (lo, hi) = (&rows.last().unwrap().1, &rows[0].1);
    let o = fretsim(d, &["invert-radius", "11.9", "--curve", "out/tau_curve.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
    assert!(
        msg.contains(&format!("{lo:.3}")) || msg.contains(&lo.to_string()),
        "{msg}"
    );
    assert!(
        msg.contains(&format!("{hi:.3}")) || msg.contains(&hi.to_string()),
        "{msg}"
    );
}

fn tiny_cube() -> FlimCube {
    let cfg = fretsim::config::RunConfig::default();
    let mut scene = cfg.scene().unwrap();
    scene.width_px = 6;
    scene.height_px = 5;
    scene.photons_per_pixel = 2e3;
    scene.flakes = vec![vec![[0.0, 0.0], [300.0, 0.0], [300.0, 500.0], [0.0, 500.0]]];
    scene.psf_fwhm_nm = 0.0;
    simulate_flim_cube(
        &scene,
        &cfg.params().unwrap(),
        &cfg.depth().unwrap(),
        &cfg.irf().unwrap(),
        &cfg.grid().unwrap(),
        2,
    )
    .unwrap()
}

#[test]
fn map_files_ignore_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_cube().write(d.join("scan")).unwrap();
    ok(fretsim(d, &["--threads", "1", "--out", "one", "fit-flim", "scan"]));
    ok(fretsim(
        d,
        &["--threads", "4", "--out", "four", "fit-flim", "scan.meta"],
    ));
    assert_eq!(
        std::fs::read(d.join("one/map.csv")).unwrap(),
        std::fs::read(d.join("four/map.csv")).unwrap()
    );
}

#[test]
fn truncated_cube_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_cube().write(d.join("scan")).unwrap();
    let bin = d.join("scan.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() / 2]).unwrap();
    let o = fretsim(d, &["fit-flim", "scan"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("payload"), "{}", stderr(&o));
}

#[test]
fn missing_command_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fretsim(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(
        fretsim(dir.path(), &["--threads", "0", "budget", "1", "1"])
            .status
            .code(),
        Some(2)
    );
}
