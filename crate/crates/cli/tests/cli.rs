//! Exit codes and outputs of the `lyapcert` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lyapcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyapcert"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn lyapcert_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyapcert"))
        .args(args)
        .env_clear()
        .envs(env.iter().copied())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gd_rate_certificate() {
    let out = lyapcert(&[
        "certify-rate",
        "--preset",
        "GD",
        "--tune",
        "quadratic-optimal",
        "--m",
        "1",
        "--L",
        "10",
        "--ell",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = json(&out);
    assert_eq!(cert["kind"], "rate");
    let r = cert["r_upper"].as_f64().unwrap();
    assert!((r - 9.0 / 11.0).abs() <= 1e-3, "r = {r}");
    assert!(cert["residuals"]["pass"].as_bool().unwrap());
}

#[test]
fn heavy_ball_at_large_kappa_has_no_certificate() {
    let out = lyapcert(&[
        "certify-rate",
        "--preset",
        "HB",
        "--tune",
        "quadratic-optimal",
        "--m",
        "1",
        "--L",
        "100",
        "--ell",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["outcome"], "no_certificate");
}

#[test]
fn gd_sensitivity_at_least_oracle() {
    let args = [
        "--preset", "GD", "--alpha", "0.2222", "--m", "1", "--L", "8", "--sigma", "1", "--d", "1",
    ];
    let oracle = lyapcert(&[&["oracle-sens"][..], &args].concat());
    assert_eq!(code(&oracle), 0);
    let oracle = json(&oracle)["gamma"].as_f64().unwrap();
    assert!((oracle - 0.35353).abs() < 1e-4);

    let out = lyapcert(&[&["certify-sens", "--ell", "6"][..], &args].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = json(&out);
    assert_eq!(cert["kind"], "sensitivity");
    assert!(cert["gamma"].as_f64().unwrap() >= oracle - 1e-6);
}

#[test]
fn output_file_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("fg.json");
    let out = lyapcert(&["certify-rate", "--preset", "FG", "--L", "10", "--out", path_str(&cert)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert_eq!(code(&lyapcert(&["replay", path_str(&cert)])), 0);

    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    let r = v["r_upper"].as_f64().unwrap();
    v["r_upper"] = Value::from(r - 0.1);
    fs::write(&cert, v.to_string()).unwrap();
    assert_eq!(code(&lyapcert(&["replay", path_str(&cert)])), 2);
}

#[test]
fn malformed_input_exits_one() {
    assert_eq!(code(&lyapcert(&["certify-rate", "--preset", "XX", "--L", "10"])), 1);
    assert_eq!(
        code(&lyapcert(&["certify-rate", "--preset", "GD", "--m", "2", "--L", "1"])),
        1
    );
    assert_eq!(code(&lyapcert(&["certify-rate", "--L", "10"])), 1);
    assert_eq!(
        code(&lyapcert(&[
            "certify-rate",
            "--preset",
            "GD",
            "--L",
            "10",
            "--tune",
            "manual"
        ])),
        1
    );
    assert_eq!(code(&lyapcert(&["no-such-command"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(
        code(&lyapcert(&["certify-rate", "--custom", path_str(&bad), "--L", "10"])),
        1
    );
}

#[test]
fn environment_overrides() {
    let out = lyapcert_env(
        &["certify-rate"],
        &[("LYAPCERT_PRESET", "GD"), ("LYAPCERT_M", "1"), ("LYAPCERT_L", "10")],
    );
    assert_eq!(code(&out), 0);
    let r = json(&out)["r_upper"].as_f64().unwrap();
    assert!((r - 9.0 / 11.0).abs() <= 1e-3);
    // Flags win over the environment.
    let out = lyapcert_env(
        &["certify-rate", "--L", "2"],
        &[("LYAPCERT_PRESET", "GD"), ("LYAPCERT_L", "10")],
    );
    assert!((json(&out)["r_upper"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-3);
}

#[test]
fn custom_realization() {
    let dir = tempfile::tempdir().unwrap();
    let alg = dir.path().join("gd.json");
    fs::write(
        &alg,
        r#"{"custom": {"A": [[1]], "B": [[-0.18181818181818182]], "C": [[1]]}}"#,
    )
    .unwrap();
    let out = lyapcert(&["oracle-rate", "--custom", path_str(&alg), "--m", "1", "--L", "10"]);
    assert_eq!(code(&out), 0);
    assert!((json(&out)["rate"].as_f64().unwrap() - 9.0 / 11.0).abs() < 1e-9);
    let out = lyapcert(&["certify-rate", "--custom", path_str(&alg), "--m", "1", "--L", "10"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn sweep_rate_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["sweep-rate", "--kappas", "2,10", "--gnuplot"];
    assert_eq!(
        code(&lyapcert(
            &[&base[..], &["--jobs", "1", "--out", path_str(&a)]].concat()
        )),
        0
    );
    assert_eq!(
        code(&lyapcert(
            &[&base[..], &["--jobs", "3", "--out", path_str(&b)]].concat()
        )),
        0
    );
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for col in [
        "kappa",
        "algorithm",
        "certified_rate",
        "oracle_rate",
        "analytic_rate",
        "certified",
    ] {
        assert!(header.contains(&col), "missing {col}");
    }
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    assert!(dir.path().join("a.csv.gp").exists());
}

#[test]
fn sweep_config_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "kappas": [100], "algorithms": [{"preset": "HB", "tuning": "quadratic-optimal"}]}"#,
    )
    .unwrap();
    let out = lyapcert(&["sweep-rate", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "HB");
    assert_eq!(row[3], "1", "no certificate encodes as rate 1");
    assert!(csv.contains("no-certificate"));

    fs::write(&cfg, r#"{"schema_version": 7, "kappas": [2]}"#).unwrap();
    assert_eq!(code(&lyapcert(&["sweep-rate", "--config", path_str(&cfg)])), 1);
}

#[test]
fn tradeoff_csv() {
    let out = lyapcert(&["tradeoff", "--alphas", "0.1,0.24", "--ell", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for col in ["algorithm", "tuning", "certified_rate", "certified_gamma"] {
        assert!(header.contains(&col), "missing {col}");
    }
    // Two GD rows plus HB, FG, FG* and TMM.
    assert_eq!(csv.lines().count(), 1 + 2 + 4);
}

#[test]
fn simulate_trace() {
    let out = lyapcert(&[
        "simulate",
        "--preset",
        "FG",
        "--L",
        "10",
        "--steps",
        "50",
        "--x0",
        "1,-2",
        "--curvatures",
        "1,10",
    ]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("k,err,x_err,fval,y0,y1\n"));
    assert_eq!(csv.lines().count(), 1 + 51);

    let noisy = [
        "simulate", "--preset", "GD", "--L", "4", "--steps", "20", "--sigma", "0.1", "--seed", "5",
    ];
    assert_eq!(lyapcert(&noisy).stdout, lyapcert(&noisy).stdout);
}

#[test]
fn interp_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.json");
    // f = y²: curvature 2.
    fs::write(
        &pts,
        r#"[{"y": [0], "u": [0], "f": 0}, {"y": [1], "u": [2], "f": 1}, {"y": [-2], "u": [-4], "f": 4}]"#,
    )
    .unwrap();
    let ok = lyapcert(&["interp-check", path_str(&pts), "--m", "1", "--L", "3"]);
    assert_eq!(code(&ok), 0);
    assert!(json(&ok)["interpolable"].as_bool().unwrap());
    let bad = lyapcert(&["interp-check", path_str(&pts), "--m", "3", "--L", "5"]);
    assert_eq!(code(&bad), 2);
    assert!(!json(&bad)["interpolable"].as_bool().unwrap());
}

#[test]
fn fig1_summary() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let out = lyapcert(&["fig1", "--trajectories", path_str(&traj)]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let steps: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(steps.len(), 3);
    assert!(steps[1] < steps[0] && steps[2] < steps[0]);
    assert!(fs::read_to_string(&traj).unwrap().starts_with("algorithm,k,"));
}

#[test]
fn debug_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let lifted = dir.path().join("lifted.json");
    let lmi = dir.path().join("lmi.json");
    let out = lyapcert(&[
        "certify-rate",
        "--preset",
        "GD",
        "--L",
        "10",
        "--ell",
        "2",
        "--dump-lifted",
        path_str(&lifted),
        "--dump-lmi",
        path_str(&lmi),
    ]);
    assert_eq!(code(&out), 0);
    let lifted: Value = serde_json::from_str(&fs::read_to_string(&lifted).unwrap()).unwrap();
    assert_eq!(lifted["ell"], 2);
    let lmi: Value = serde_json::from_str(&fs::read_to_string(&lmi).unwrap()).unwrap();
    assert!(lmi.is_object());
}
