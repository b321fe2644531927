use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phreact"));
    c.env_remove("PHREACT_CALIBRATION");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn solutions() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/solutions")
}

fn sol(name: &str) -> String {
    solutions().join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn water_is_neutral() {
    let o = run(&["ph", &sol("water.sol")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "7.0000\n");
    assert!(o.stderr.is_empty());
}

#[test]
fn mix_writes_result_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.sol");
    let o = run(&[
        "mix",
        &sol("hcl_10mM.sol"),
        "1",
        &sol("naoh_0.1mM.sol"),
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p: f64 = stdout(&o).trim().parse().unwrap();
    assert!((p - 2.31).abs() <= 0.01);
    let again = run(&["ph", out.to_str().unwrap()]);
    let q: f64 = stdout(&again).trim().parse().unwrap();
    assert!((p - q).abs() < 1e-4);
}

#[test]
fn unreachable_target_names_range() {
    let o = run(&["mixto", "--target", "12"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    let e = stderr(&o);
    assert!(e.contains("unreachable") && e.contains("[2.0000, 10.0000]"), "{e}");
}

#[test]
fn mixto_matches_golden_trace() {
    let o = run(&["mixto", "--target", "6.0", "--seed", "42", "--noise", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let golden = include_str!("golden/mixto_ph6_seed42.txt");
    assert_eq!(stdout(&o), golden);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["frobnicate"][..],
        &["ph"],
        &["ph", "/no/such/file.sol"],
        &["mixto", "--target", "6", "--bogus"],
        &["simulate", "no_such_scenario", "--until", "1"],
        &["simulate", "umbrella", "--until", "-1"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn malformed_solution_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.sol");
    std::fs::write(&p, "volume_l = 1.0\n[contents]\nunobtainium = 0.1\n").unwrap();
    let o = run(&["ph", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unobtainium"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["ph", "mix", "mixto", "simulate", "fit", "ticker", "gradiator", "export", "serve"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
}

fn simulate(dir: &Path) -> Output {
    run(&[
        "simulate",
        "umbrella.scn",
        "--until",
        "120",
        "--dt",
        "0.1",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn simulate_writes_frames_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = simulate(&a);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(simulate(&b).status.code(), Some(0));

    let series = std::fs::read_to_string(a.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 1200);
    let frames = std::fs::read_to_string(a.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 1200 * 24 * 16);

    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["frames"], 1200);
    assert_eq!(m["seed"], 7);
    assert_eq!(m["calibration"], "default_synthetic");
    assert_eq!(m["calibration_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["scenario_sha256"].as_str().unwrap().len(), 64);
    assert!(m["version"].is_string() && m["core_version"].is_string());

    for f in ["frames.csv", "series.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn png_export_has_one_pixel_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.png");
    let o = run(&["export", "frame", "umbrella", "--at", "1", "--format", "png", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    // IHDR width and height
    assert_eq!(u32::from_be_bytes(bytes[16..20].try_into().unwrap()), 24);
    assert_eq!(u32::from_be_bytes(bytes[20..24].try_into().unwrap()), 16);
}

#[test]
fn exported_calibration_round_trips_through_env() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.calib");
    assert_eq!(run(&["export", "calibration", "--out", p.to_str().unwrap()]).status.code(), Some(0));
    let o = bin()
        .env("PHREACT_CALIBRATION", &p)
        .args(["simulate", "pasta", "--until", "2", "--out"])
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["calibration_source"], p.display().to_string());

    let o = bin().env("PHREACT_CALIBRATION", dir.path().join("missing")).args(["ph", &sol("water.sol")]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_are_listed_and_exported() {
    let o = run(&["export", "scenario"]);
    let names = stdout(&o);
    for n in ["umbrella", "toothbrush", "apple_display", "pasta", "ticker", "gradiator"] {
        assert!(names.lines().any(|l| l == n), "{n}");
    }
    let o = run(&["export", "scenario", "ticker"]);
    assert!(stdout(&o).contains("[[channel"));
}

#[test]
fn ticker_and_gradiator_print_csv() {
    let o = run(&["ticker", "--length-mm", "4", "--n-cells", "33"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("marker,position_mm,arrival_s"));
    let times: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(times.len(), 3);
    assert!(times.windows(2).all(|w| w[0] < w[1]));

    let o = run(&["gradiator", "--length-mm", "2", "--n-cells", "5"]);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "position_mm,fraction,ph");
    assert!(rows[1].ends_with(",2.000000") && rows[5].ends_with(",10.000000"), "{out}");
}

#[test]
fn fit_recovers_default_shape_from_its_own_curve() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("shape.csv");
    let mut csv = String::from("ph,angle\n");
    let calib = phreact_core::materials::CalibrationSet::default_synthetic();
    for i in 0..=32 {
        let ph = 2.0 + 0.25 * i as f64;
        let a = phreact_core::materials::shape_equilibrium_angle(ph, &calib).unwrap();
        csv.push_str(&format!("{ph},{a}\n"));
    }
    std::fs::write(&table, csv).unwrap();
    let out = dir.path().join("fit.calib");
    let report = dir.path().join("report.json");
    let o = run(&[
        "fit",
        "--in",
        table.to_str().unwrap(),
        "--kind",
        "shape",
        "--out",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("shape.curve"));
    let fitted = phreact_core::materials::CalibrationSet::load(&out).unwrap();
    assert!(!fitted.synthetic);
    for (f, e) in fitted.shape.bumps.iter().zip(&calib.shape.bumps) {
        assert!((f.center - e.center).abs() < 1e-6);
    }
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    assert!(r["retained"].as_array().unwrap().iter().any(|v| v == "odor.pka_eff"));

    let o = run(&["fit", "--in", table.to_str().unwrap(), "--kind", "odor", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "wrong header for kind");
}
