use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hcberry(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcberry")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let o = hcberry(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows =
        r.records().map(|rec| rec.unwrap().iter().map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect()).collect();
    (header, rows)
}

fn out_arg(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn bands_grid_and_cut() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "b");
    run_ok(&["bands", "--grid-nx", "7", "--grid-ny", "5", "--window", "-1,1,-1,1", "--delta", "0.3", "--out", &out]);
    let (header, rows) = read_csv(&tmp.path().join("b/dispersion.csv"));
    assert_eq!(header, ["kx", "ky", "value"]);
    assert_eq!(rows.len(), 35);
    let gamma = rows.iter().find(|r| r[0].abs() < 1e-12 && r[1].abs() < 1e-12).expect("Γ is a node");
    assert!((gamma[2] - (9.0f64 + 0.09).sqrt()).abs() < 1e-12);

    let out = out_arg(&tmp, "s");
    run_ok(&["bands", "--strain", "2", "--grid-nx", "401", "--grid-ny", "3", "--out", &out]);
    let minima = metadata(&tmp.path().join("s"))["results"]["cut_gap_minima_kx"].as_array().unwrap().len();
    assert_eq!(minima, 1);
    let out = out_arg(&tmp, "u");
    run_ok(&["bands", "--grid-nx", "401", "--grid-ny", "3", "--out", &out]);
    let minima = metadata(&tmp.path().join("u"))["results"]["cut_gap_minima_kx"].as_array().unwrap().len();
    assert_eq!(minima, 2);
}

#[test]
fn curvature_reports_zero_chern_and_odd_extrema() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "c");
    run_ok(&["curvature", "--grid-nx", "41", "--grid-ny", "41", "--plaquette-cells", "120", "--out", &out]);
    let r = &metadata(&tmp.path().join("c"))["results"];
    assert_eq!(r["chern_number"], 0);
    let (lo, hi) = (r["exact"]["min"].as_f64().unwrap(), r["exact"]["max"].as_f64().unwrap());
    assert!((lo + hi).abs() < 1e-9 * hi);
    assert!(r["exact_vs_plaquette_max_rel"].as_f64().unwrap() < 0.1);
    for f in ["dispersion.csv", "curvature_exact.csv", "curvature_two_band.csv", "curvature_plaquette.csv"] {
        assert!(tmp.path().join("c").join(f).exists(), "{f}");
    }
}

#[test]
fn trajectory_suite_files() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "t");
    run_ok(&["trajectory", "--out", &out]);
    let dir = tmp.path().join("t");
    for (name, phi) in [
        ("trajectory_phi0.csv", 0.0f64),
        ("trajectory_phi30.csv", std::f64::consts::PI / 6.0),
        ("trajectory_phi45.csv", std::f64::consts::PI / 4.0),
    ] {
        let (header, rows) = read_csv(&dir.join(name));
        assert_eq!(header, ["t", "x", "y", "kx", "ky"]);
        for r in &rows {
            assert!((r[3] - r[0] * phi.cos()).abs() < 1e-12 && (r[4] - r[0] * phi.sin()).abs() < 1e-12);
        }
        if phi == std::f64::consts::PI / 6.0 {
            let perp = rows.iter().map(|r| (-r[1] * phi.sin() + r[2] * phi.cos()).abs()).fold(0.0, f64::max);
            assert!(perp < 1e-8, "{perp}");
        }
    }
}

#[test]
fn map_outputs_and_defaults() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "m");
    run_ok(&["map", "--grid-nx", "9", "--grid-ny", "9", "--profile-samples", "20", "--out", &out]);
    let dir = tmp.path().join("m");
    let meta = metadata(&dir);
    assert_eq!(meta["config"]["force"], 1.0);
    assert_eq!(meta["config"]["time"], 0.2);
    assert!(meta["results"]["masked_nodes"].is_u64());
    let (header, rows) = read_csv(&dir.join("profile.csv"));
    assert_eq!(header.len(), 5);
    assert_eq!(rows.len(), 2 * 20 - 1);
    let (header, rows) = read_csv(&dir.join("error.csv"));
    assert_eq!(header, ["kx", "ky", "value", "status"]);
    assert_eq!(rows.len(), 81);
}

#[test]
fn merge_scan_table() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "s");
    run_ok(&["merge-scan", "--strains", "1,1.25,1.5,1.75,2", "--out", &out]);
    let (_, rows) = read_csv(&tmp.path().join("s/merge.csv"));
    assert_eq!(rows.len(), 5);
    let k_to_kprime = 4.0 * std::f64::consts::PI / (3.0 * 3f64.sqrt());
    assert!((rows[0][1] - k_to_kprime).abs() < 1e-6);
    assert!(rows[4][1] < 1e-4);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    assert!(tmp.path().join("s/persistence.csv").exists());
}

#[test]
fn validate_passes_and_detects_injected_fault() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "v");
    let o = hcberry(&["validate", "--skip-oracle", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("v/report.json")).unwrap()).unwrap();
    for c in report["checks"].as_array().unwrap() {
        assert!(c["tolerance"].as_f64().unwrap() > 0.0);
    }
    let out = out_arg(&tmp, "f");
    let o = hcberry(&["validate", "--skip-oracle", "--inject-fault", "biased-sign", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL peak value at K"));
}

#[test]
fn packet_run_writes_com_tracks() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "p");
    run_ok(&["packet", "--cells", "40,40", "--sigma", "4", "--time", "0.1", "--out", &out]);
    let dir = tmp.path().join("p");
    let probe = &metadata(&dir)["results"]["probe"];
    assert!(probe["norm_drift"].as_f64().unwrap() < 1e-10);
    let (header, rows) = read_csv(&dir.join("com_plus.csv"));
    assert_eq!(header, ["t", "x", "y"]);
    assert!((rows.last().unwrap()[0] - 0.1).abs() < 1e-12);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let args = |d: &str| {
        vec![
            "map".to_string(),
            "--grid-nx".into(),
            "7".into(),
            "--grid-ny".into(),
            "6".into(),
            "--profile-samples".into(),
            "10".into(),
            "--out".into(),
            d.to_string(),
        ]
    };
    for d in ["a", "b"] {
        let v = args(&out_arg(&tmp, d));
        run_ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["mapped.csv", "error.csv", "profile.csv", "exact.csv", "displacement.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let strip = |d: &str| {
        let mut m = metadata(&tmp.path().join(d));
        m["config"]["out"] = Value::Null;
        m
    };
    assert_eq!(strip("a"), strip("b"));
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("run.toml");
    std::fs::write(&file, "delta = 0.25\nstrain = 1.5\ngrid-nx = 4\ngrid-ny = 4\n").unwrap();
    let out = out_arg(&tmp, "o");
    run_ok(&["bands", "--config", file.to_str().unwrap(), "--delta", "0.05", "--out", &out]);
    let cfg = &metadata(&tmp.path().join("o"))["config"];
    assert_eq!(cfg["delta"], 0.05);
    assert_eq!(cfg["strain"], 1.5);
    assert_eq!(cfg["grid_nx"], 4);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "x");
    assert_eq!(hcberry(&["bands", "--band", "middle", "--out", &out]).status.code(), Some(2));
    assert_eq!(hcberry(&["map", "--time", "-1", "--out", &out]).status.code(), Some(2));
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "unknown-key = 3\n").unwrap();
    assert_eq!(hcberry(&["bands", "--config", bad.to_str().unwrap(), "--out", &out]).status.code(), Some(2));
    assert_eq!(hcberry(&["bands", "--window", "1,0,0,1", "--out", &out]).status.code(), Some(2));
    // A step this coarse fails the integrator's own halving check.
    assert_eq!(hcberry(&["trajectory", "--dt", "0.5", "--out", &out]).status.code(), Some(3));
    // Packet too wide for the flake.
    assert_eq!(hcberry(&["packet", "--cells", "20,20", "--sigma", "10", "--out", &out]).status.code(), Some(3));
}
