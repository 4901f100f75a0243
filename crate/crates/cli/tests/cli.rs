use std::path::Path;
use std::process::{Command, Output};

use nvcav_cli::{metadata_lines, RunConfig, SweepKind};
use nvcav_core::experiments::{sweep_grid, sweep_green, write_sweep_csv};
use nvcav_core::SweepConfig;

fn nvcav(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvcav"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn data_rows(text: &str) -> usize {
    text.lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn sweep_green_matches_library_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = nvcav(&["sweep-green", "--out", "g.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli = std::fs::read(dir.path().join("g.csv")).unwrap();

    let cfg = SweepConfig::pump_sweep_default();
    let pts = sweep_green(&cfg).unwrap();
    let eff = RunConfig::default().effective(SweepKind::Green).unwrap();
    let mut lib = Vec::new();
    write_sweep_csv(
        &mut lib,
        &metadata_lines(&eff, "sweep-green"),
        pts.iter().map(|p| (p.green_power, 67e-6, Some(p))),
    )
    .unwrap();
    assert_eq!(cli, lib);
    assert_eq!(data_rows(&String::from_utf8(cli).unwrap()), cfg.green_powers.len());
}

#[test]
fn sweep_grid_matches_library_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[sweep]\ngreen_mw = [10.0, 25.0]\nred_uw = [1000.0, 47000.0]\n").unwrap();
    let out = nvcav(&["--config", "c.toml", "sweep-grid", "--out", "grid.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli = std::fs::read(dir.path().join("grid.csv")).unwrap();

    let cfg = SweepConfig {
        green_powers: vec![10e-3, 25e-3],
        red_powers: vec![1e-3, 47e-3],
        ..SweepConfig::seed_grid_default()
    };
    let eff = RunConfig::load(&dir.path().join("c.toml"))
        .unwrap()
        .effective(SweepKind::Grid)
        .unwrap();
    let mut lib = Vec::new();
    sweep_grid(&cfg)
        .unwrap()
        .write_csv(&mut lib, &metadata_lines(&eff, "sweep-grid"))
        .unwrap();
    assert_eq!(String::from_utf8(cli).unwrap(), String::from_utf8(lib).unwrap());
}

#[test]
fn rerun_from_csv_metadata_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[parameters]\nvariant = \"nv_minus_only\"\nnv_density_ppm = 1.7\n[geometry]\nfield_enhancement_f = 800\n[sweep]\ngreen_log_mw = { min = 2.0, max = 80.0, points = 12 }\n",
    )
    .unwrap();
    assert!(nvcav(&["--config", "c.toml", "sweep-green", "--out", "a.csv"], dir.path()).status.success());
    assert!(nvcav(&["--config", "a.csv", "sweep-green", "--out", "b.csv"], dir.path()).status.success());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(data_rows(&a), 12);
    assert!(a.contains("variant = \"nv_minus_only\""));
}

#[test]
fn steady_reports_normalized_populations() {
    let dir = tempfile::tempdir().unwrap();
    let out = nvcav(&["steady", "--green-mw", "50", "--red-uw", "67"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pops: Vec<f64> = v["populations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(pops.len(), 7);
    assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(v["f_amp"].as_f64().unwrap() >= 1.0);
}

#[test]
fn xsection_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    assert!(nvcav(&["synth", "--out", "emission_synth.csv"], dir.path()).status.success());
    let out = nvcav(&["xsection", "--input", "emission_synth.csv", "--n", "2.4"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sigma = v["sigma_m2"].as_f64().unwrap();
    assert!((sigma - 3.22e-21).abs() / 3.22e-21 < 0.15, "{sigma}");
    let csv = std::fs::read_to_string(dir.path().join("xsection.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "wavelength_nm,sigma_m2"));
}

#[test]
fn fit_peaks_reports_table() {
    let dir = tempfile::tempdir().unwrap();
    assert!(nvcav(&["synth", "--out", "s.csv", "--points", "1000"], dir.path()).status.success());
    std::fs::write(dir.path().join("init.csv"), "center_nm,amplitude,fwhm_nm\n637.5,0.1,3.2\n").unwrap();
    let out = nvcav(&["fit-peaks", "--input", "s.csv"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["peaks"].as_array().unwrap().len(), 8);
    assert_eq!(v["converged"], true);
    let single = nvcav(&["fit-peaks", "--input", "s.csv", "--initial", "init.csv"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&single.stdout).unwrap();
    assert_eq!(v["peaks"].as_array().unwrap().len(), 1);
}

#[test]
fn errors_are_single_line_json_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[geometry]\nspot_radius_mm = 1\n").unwrap();
    std::fs::write(dir.path().join("neg.toml"), "[parameters]\nr35_mhz = -1\n").unwrap();
    for (args, code) in [
        (vec!["--config", "bad.toml", "steady"], 2),
        (vec!["--config", "neg.toml", "steady"], 2),
        (vec!["xsection", "--input", "missing.csv"], 4),
        (vec!["--config", "missing.toml", "steady"], 4),
    ] {
        let out = nvcav(&args, dir.path());
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(&err).unwrap();
        assert!(v["error"].is_string() && v["message"].is_string());
    }
}

#[test]
fn plots_are_deterministic_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "[sweep]\ngreen_log_mw = { min = 1.0, max = 150.0, points = 20 }\n").unwrap();
    assert!(nvcav(&["--config", "c.toml", "sweep-green", "--out", "g.csv", "--plot"], d).status.success());
    assert!(d.join("g.pump-sweep.svg").exists() && d.join("g.populations.svg").exists());
    assert!(nvcav(&["plot", "--input", "g.csv", "--kind", "pump-sweep", "--out", "a.svg"], d).status.success());
    assert!(nvcav(&["plot", "--input", "g.csv", "--kind", "pump-sweep", "--out", "b.svg"], d).status.success());
    let a = std::fs::read(d.join("a.svg")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.svg")).unwrap());
    assert_eq!(a, std::fs::read(d.join("g.pump-sweep.svg")).unwrap());
    assert!(String::from_utf8(a).unwrap().contains("stroke-dasharray"));

    std::fs::write(d.join("empty.csv"), "green_power_mW,f_amp,f_sp\n").unwrap();
    let out = nvcav(&["plot", "--input", "empty.csv", "--kind", "pump-sweep", "--out", "e.svg"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("schema_mismatch"));
}
