use fiokit::io::{read_field, write_field};
use fiokit::{GridField, GridSpec, C64};
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn fiokit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiokit")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

const SMALL: [&str; 4] = ["--size", "64", "--set", "grid.period_over_pi=8"];

fn sample_field(dir: &Path) -> std::path::PathBuf {
    let g = GridSpec::new(2, 32, 8.0 * PI).unwrap();
    let f = GridField::from_fn(g, |x| C64::new((x[0] * 0.5).cos() + (x[1] * 0.75).sin(), 0.0));
    let path = dir.join("f.fiof");
    write_field(&path, &f).unwrap();
    path
}

#[test]
fn calibrate_succeeds_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["calibrate", "--out", "out"];
    args.extend(SMALL);
    let o = fiokit(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert_eq!(v["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("out/calibrate.json").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS frame_reproduction"));
}

#[test]
fn calibrate_with_too_few_directions_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = fiokit(&["calibrate", "--directions", "4", "--out", "out"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL frame_construction"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fiokit(&["calibrate", "--eps", "0.3"], dir.path())), 2);
    assert_eq!(code(&fiokit(&["calibrate", "--set", "grid.bogus=1"], dir.path())), 2);
    assert_eq!(code(&fiokit(&["no-such-command"], dir.path())), 2);
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&fiokit(&["calibrate", "--config", "bad.json"], dir.path())), 2);
}

#[test]
fn missing_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fiokit(&["calibrate", "--config", "absent.json"], dir.path())), 3);
    assert_eq!(code(&fiokit(&["norm", "--field", "absent.fiof"], dir.path())), 3);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"grid":{"size":32,"period_over_pi":8},"frame":{"eps":0.1}}"#).unwrap();
    let o = fiokit(&["calibrate", "--config", "c.json", "--set", "grid.size=48", "--size", "64", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["provenance"]["config"]["grid"]["size"], 64);
    assert_eq!(v["provenance"]["config"]["frame"]["eps"], 0.1);
}

#[test]
fn norm_reports_each_exponent() {
    let dir = tempfile::tempdir().unwrap();
    sample_field(dir.path());
    let o = fiokit(&["norm", "--field", "f.fiof", "--s", "-0.25", "--p", "2,4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(v["s"], -0.25);
    assert!(rows.iter().all(|r| r["hpfio"].as_f64().unwrap() > 0.0));
}

#[test]
fn apply_identity_and_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_field(dir.path());
    std::fs::write(dir.path().join("id.json"), r#"{"kind":"analytic-preset","preset":"identity"}"#).unwrap();
    let o = fiokit(&["apply", "--symbol", "id.json", "--field", "f.fiof", "--output", "g.fiof"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_field(&input).unwrap();
    let g = read_field(&dir.path().join("g.fiof")).unwrap();
    assert!(g.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs());
    std::fs::write(dir.path().join("b.json"), r#"{"kind":"analytic-preset","preset":"multiplier_bessel","m":-1}"#).unwrap();
    let o = fiokit(&["apply", "--symbol", "b.json", "--field", "f.fiof", "--output", "h.fiof"], dir.path());
    assert_eq!(code(&o), 0);
    let h = read_field(&dir.path().join("h.fiof")).unwrap();
    let expect = fiokit::fourier::bessel_potential(&f, -1.0).unwrap();
    assert!(h.sub(&expect).unwrap().max_abs() <= 1e-12 * expect.max_abs());
}

#[test]
fn smooth_splits_and_applies() {
    let dir = tempfile::tempdir().unwrap();
    sample_field(dir.path());
    std::fs::write(dir.path().join("c.json"), r#"{"kind":"analytic-preset","preset":"rough_chirp","r":1,"delta":0.5}"#)
        .unwrap();
    let o = fiokit(
        &["smooth", "--symbol", "c.json", "--gamma", "0.75", "--field", "f.fiof", "--sharp-out", "s.fiof", "--flat-out", "t.fiof"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["exactness_residual"].as_f64().unwrap() <= 1e-12);
    assert!(dir.path().join("s.fiof").exists() && dir.path().join("t.fiof").exists());
    let o = fiokit(&["smooth", "--symbol", "c.json", "--gamma", "0.25", "--field", "f.fiof", "--sharp-out", "s.fiof", "--flat-out", "t.fiof"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn bench_is_deterministic_and_follows_schema() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("id.json"), r#"{"kind":"analytic-preset","preset":"identity"}"#).unwrap();
    let args = |out: &'static str| {
        vec![
            "bench-boundedness",
            "--set",
            "bench.grid.size=64",
            "--set",
            "bench.grid.period_over_pi=4",
            "--set",
            "bench.bands=[2,3]",
            "--set",
            "bench.shift_by_tau=false",
            "--set",
            "bench.symbol=id.json",
            "--out",
            out,
        ]
    };
    let a = fiokit(&args("a"), dir.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = fiokit(&args("b"), dir.path());
    assert_eq!(code(&b), 0);
    let ca = std::fs::read_to_string(dir.path().join("a/bench.csv")).unwrap();
    let cb = std::fs::read_to_string(dir.path().join("b/bench.csv")).unwrap();
    let rows = |c: &str| c.lines().filter(|l| !l.starts_with("# config_sha256")).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(rows(&ca), rows(&cb));
    let header = ca.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "p,s_in,s_out,k,member,in_norm,out_norm,ratio");
    for line in ca.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let ratio: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-10, "{line}");
    }
    let v = json(&a);
    assert_eq!(v["bounded_trend"], true);
    assert_eq!(v["power_check"]["consistent"], true);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/bench.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["config_hash"], v["provenance"]["config_hash"]);
    assert!(ca.contains(v["provenance"]["config_hash"].as_str().unwrap()));
}
