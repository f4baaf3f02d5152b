use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampcert"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const P1_PROBLEM: &str = r#"
[problem]
eps = "1"
C = "2"
a_prime = 1.0
F = "0"
F_z = "0"
k = 0.0
h = 0.0
A = 0.0
omega = 1.0
rho = 1.0
mu = 1.0
tau = 1.0
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn thresholds_on_p1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["thresholds"], &configs().join("p1.toml"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let num = |p: &str| v.pointer(p).and_then(Value::as_f64).unwrap_or_else(|| panic!("missing {p}"));
    assert!((num("/theta1/value") - 3.0).abs() < 1e-12);
    assert!((num("/gamma31/value") - 28.0).abs() < 1e-12);
    assert!((num("/chi/value") - 0.125).abs() < 1e-12);
    assert!((num("/configured/0/lambda") - 0.0258621).abs() < 1e-7);
    let file: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("thresholds.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn malformed_toml_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{P1_PROBLEM}\n[time]\ndt = 0.01\nt_end = = 5\n"));
    let o = run(&["check"], &cfg, tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("run.toml:18:9:"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{P1_PROBLEM}\n[time]\ndt = 0.01\nt_end = 5.0\nsteps = 3\n"));
    let o = run(&["check"], &cfg, tmp.path());
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("run.toml:19:1:") && err.contains("steps"), "{err}");
}

#[test]
fn bad_expression_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{P1_PROBLEM}\n[time]\ndt = 0.01\nt_end = 5.0\n").replace("F = \"0\"", "F = \"sin(z\"");
    let o = run(&["check"], &write_config(tmp.path(), &body), tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("[problem]"), "{}", stderr(&o));
}

#[test]
fn certify_p1_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["certify"], &configs().join("p1.toml"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cert: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("certificate_000.json")).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "certified");
    assert_eq!(cert["files"][1], "certificate_000_series.csv");
    let series = fs::read_to_string(tmp.path().join("certificate_000_series.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap(), "t,d,W,lower_bound,upper_bound,y_comparison,envelope");
    assert_eq!(series.lines().count(), 20_002);
}

#[test]
fn oversized_data_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{P1_PROBLEM}\n[grid]\nn_interior = 49\n[time]\ndt = 0.05\nt_end = 5.0\n[certify]\nsigmas = [0.2]\nshapes = [{{ u0 = \"sin(x)\" }}]\nd_t0 = 0.5\nhorizon = 5.0\n");
    let o = run(&["certify"], &write_config(tmp.path(), &body), tmp.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("hypothesis_not_met"));
}

#[test]
fn sigma_beyond_xi_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{P1_PROBLEM}\n[grid]\nn_interior = 49\n[time]\ndt = 0.05\nt_end = 5.0\n[certify]\nsigmas = [5.0]\nshapes = [{{ u0 = \"sin(x)\" }}]\n");
    let o = run(&["certify"], &write_config(tmp.path(), &body), tmp.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn wave_fails_assumptions_but_simulates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("wave.toml");
    assert_eq!(code(&run(&["check"], &cfg, tmp.path())), 2);
    assert_eq!(code(&run(&["thresholds"], &cfg, tmp.path())), 2);
    assert_eq!(code(&run(&["certify"], &cfg, tmp.path())), 1);
    let o = run(&["simulate", "--horizon", "2"], &cfg, tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);
    // no W without thresholds
    assert!(csv.lines().nth(1).unwrap().contains(",,"));
    assert!(!tmp.path().join("simulation.json").exists());
}

#[test]
fn blow_up_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{P1_PROBLEM}\n[grid]\nn_interior = 31\n[time]\ndt = 0.01\nt_end = 20.0\n[certify]\nkind = \"exponential\"\nshapes = [{{ u0 = \"20*sin(x)\" }}]\n")
        .replace("F = \"0\"", "F = \"z^3\"")
        .replace("F_z = \"0\"", "F_z = \"3*z^2\"");
    let o = run(&["simulate"], &write_config(tmp.path(), &body), tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_config_gives_identical_outputs() {
    let cfg = configs().join("varying.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        let o = run(&["sweep", "--horizon", "5", "--seed", "3", "--threads", "2"], &cfg, out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&["simulate", "--horizon", "5"], &cfg, out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let fa = read_dir_sorted(a.path());
    assert!(fa.iter().any(|(n, _)| n == "sweep_summary.csv"));
    assert_eq!(fa, read_dir_sorted(b.path()));
    assert_eq!(read_dir_sorted(&a.path().join("sweep")), read_dir_sorted(&b.path().join("sweep")));
    let summary = fs::read_to_string(a.path().join("sweep_summary.csv")).unwrap();
    // 2 sigmas × 2 t0s × (2 listed + 2 random) shapes
    assert_eq!(summary.lines().count(), 1 + 16);
}

#[test]
fn seed_changes_random_shapes() {
    let cfg = configs().join("varying.toml");
    let shapes = |seed: &str| {
        let tmp = tempfile::tempdir().unwrap();
        let o = run(&["sweep", "--horizon", "1", "--seed", seed], &cfg, tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("sweep.json")).unwrap()).unwrap();
        v["shapes"].clone()
    };
    let (a, b) = (shapes("1"), shapes("2"));
    assert_eq!(a[0], b[0]);
    assert_ne!(a[2], b[2]);
}
