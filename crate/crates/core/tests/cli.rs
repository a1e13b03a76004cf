use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use atomless::model::AtomlessMdp;
use atomless::occupancy::{performance, performance_deterministic};
use atomless::policy::AnyPolicy;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/two_cell.toml")
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomless")).args(args).output().unwrap()
}

fn report(bytes: &[u8]) -> serde_json::Value {
    let text = String::from_utf8_lossy(bytes);
    let start = text.find('{').expect("no report");
    serde_json::from_str(&text[start..]).unwrap()
}

#[test]
fn derandomize_writes_policy_and_report() {
    let dir = scratch("derandomize");
    let pi = dir.join("pi.txt");
    let phi = dir.join("phi.txt");
    std::fs::write(&pi, "0 1 0.35 0.65\n").unwrap();
    let out = run(&[
        "derandomize",
        fixture().to_str().unwrap(),
        pi.to_str().unwrap(),
        "--tol",
        "1e-8",
        "--out",
        phi.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out.stdout);
    assert_eq!(rep["status"], "ok");
    assert_eq!(rep["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(rep["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let m = AtomlessMdp::from_toml(&std::fs::read_to_string(fixture()).unwrap()).unwrap();
    let det = AnyPolicy::parse(&std::fs::read_to_string(&phi).unwrap(), 2).unwrap().into_deterministic().unwrap();
    let sto = AnyPolicy::parse("0 1 0.35 0.65\n", 2).unwrap().into_stationary(2);
    let a = performance_deterministic(&m, &det, 1e-13).unwrap();
    let b = performance(&m, &sto, 1e-13).unwrap();
    let err = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 1e-8, "error {err}");
}

#[test]
fn evaluate_prints_csv() {
    let dir = scratch("evaluate");
    let phi = dir.join("phi.txt");
    std::fs::write(&phi, "0 0.5 0\n0.5 1 1\n").unwrap();
    let out = run(&["evaluate", fixture().to_str().unwrap(), phi.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("v0,v1"));
    let vals: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(vals.len(), 2);
    assert_eq!(report(&out.stderr)["exit_code"], 0);
}

#[test]
fn mix_on_onestep_builtin() {
    let dir = scratch("mix");
    let (p0, p1) = (dir.join("p0.txt"), dir.join("p1.txt"));
    std::fs::write(&p0, "0 1 0\n").unwrap();
    std::fs::write(&p1, "0 1 1\n").unwrap();
    let out = run(&[
        "mix",
        "builtin:unit-interval-onestep",
        p0.to_str().unwrap(),
        p1.to_str().unwrap(),
        "--lambda",
        "0.25",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let phi = AnyPolicy::parse(&String::from_utf8(out.stdout).unwrap(), 2).unwrap().into_deterministic().unwrap();
    let m = atomless::model::unit_interval_onestep();
    let v = performance_deterministic(&m, &phi, 1e-13).unwrap();
    assert!((v[0] - 0.75).abs() <= 1e-9);
}

#[test]
fn path_grid_rows() {
    let dir = scratch("path");
    let (p0, p1) = (dir.join("p0.txt"), dir.join("p1.txt"));
    std::fs::write(&p0, "0 1 0\n").unwrap();
    std::fs::write(&p1, "0 1 1\n").unwrap();
    let out = run(&["path", fixture().to_str().unwrap(), p0.to_str().unwrap(), p1.to_str().unwrap(), "--grid", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("alpha,"));
}

#[test]
fn builtin_example_closed_forms() {
    let out = run(&["builtin", "example-3.12", "--n-max", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let et: f64 = cols[1].parse().unwrap();
        let expected = match cols[0] {
            "inf" => 2.0,
            n => 3.0 - 2f64.powi(1 - n.parse::<i32>().unwrap()),
        };
        assert!((et - expected).abs() <= 1e-12, "{line}");
    }
}

#[test]
fn builtin_roundtrips_through_validate() {
    let dir = scratch("builtin");
    let path = dir.join("random.toml");
    let out = run(&["builtin", "random", "--seed", "11", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out.stderr)["summary"]["valid"], true);
}

#[test]
fn lyapunov_find_and_hull() {
    let out = run(&["lyapunov", "find", "builtin:linear", "--target", "0.5,0.5", "--tol", "1e-7"]);
    assert_eq!(out.status.code(), Some(0));
    let total: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|s| s.parse().unwrap()).collect();
            v[1] - v[0]
        })
        .sum();
    assert!((total - 0.5).abs() <= 1e-6);
    let out = run(&["lyapunov", "hull", "builtin:linear", "--directions", "16"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "kind = \"absorbing\"\ngrid = [0.0, 1.0]\n").unwrap();
    assert_eq!(run(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["validate", "/nonexistent/model.toml"]).status.code(), Some(4));
    assert_eq!(run(&["builtin", "nope"]).status.code(), Some(2));
    let out = run(&["lyapunov", "find", "builtin:linear", "--target", "0.9,0.1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out.stderr)["status"], "error");
    assert_eq!(run(&["transform", "discount", fixture().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn weight_transform_cli() {
    let out = run(&["transform", "weight", fixture().to_str().unwrap(), "--weights", "1,1,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = AtomlessMdp::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(m.criteria(), 2);
}
