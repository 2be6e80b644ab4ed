use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cbrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbrc"))
        .args(args)
        .env("CBRC_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example(dir: &TempDir, rho: f64, rows: bool) -> PathBuf {
    write(
        dir,
        &format!("example-{rho}-{rows}.json"),
        &format!(r#"{{"criterion": {{"type": "paper_example", "rho": {rho}, "with_constraint10": {rows}}}}}"#),
    )
}

fn weights(solution: &Value) -> Vec<f64> {
    solution["design"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["weight"].as_f64().unwrap())
        .collect()
}

fn solve_json(args: &[&str]) -> (Value, i32) {
    let out = cbrc(args);
    let code = out.status.code().unwrap();
    (serde_json::from_slice(&out.stdout).unwrap(), code)
}

/// Prediction criterion of the straight-line example from its definition.
fn direct_value(rho: f64, w: &[f64]) -> f64 {
    let d = w.len();
    let (mut m, mut v) = ([0.0f64; 3], [0.0f64; 3]);
    for (k, wk) in w.iter().enumerate() {
        let x = k as f64 / (d - 1) as f64;
        for (acc, scale) in [(&mut m, *wk), (&mut v, 1.0 / d as f64)] {
            acc[0] += scale;
            acc[1] += scale * x;
            acc[2] += scale * x * x;
        }
    }
    // tr(S⁻¹ V) for a 2×2 symmetric S = [a b; b c]
    let tr = |a: f64, b: f64, c: f64| (c * v[0] - 2.0 * b * v[1] + a * v[2]) / (a * c - b * b);
    let delta = rho / (1.0 - rho);
    tr(m[0], m[1], m[2]) + 99.0 * tr(m[0] + 100.0, m[1], m[2] + 1.0 / delta)
}

#[test]
fn exact_solve_reproduces_endpoint_design() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, false);
    let (sol, code) = solve_json(&["solve", s(&cfg), "--mode", "exact"]);
    assert_eq!(code, 0);
    assert_eq!(sol["status"], "optimal");
    let w = weights(&sol);
    let mut expected = vec![0.0; 51];
    expected[0] = 2.0;
    expected[50] = 8.0;
    assert_eq!(w, expected);
    assert!(sol["gap"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn approximate_solve_under_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, true);
    let (sol, code) = solve_json(&["solve", s(&cfg)]);
    assert_eq!(code, 0);
    let w = weights(&sol);
    assert!((w[3] - 0.602).abs() <= 5e-3, "{}", w[3]);
    assert!((w[26] - 0.398).abs() <= 5e-3, "{}", w[26]);
    for k in [0, 29, 32, 35, 38, 41, 44, 47, 50] {
        assert!((w[k] - 1.0).abs() <= 5e-3);
    }
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", r#"{"criterion": {"type": "paper_example", "rho": "x"}}"#);
    let out_path = dir.path().join("out.json");
    let out = cbrc(&["solve", s(&cfg), "-o", s(&out_path)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!out_path.exists());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("criterion.rho"), "{err}");

    let cfg = write(&dir, "broken.json", "{\n  \"criterion\": {\"type\": \"paper_example\",\n  }");
    let out = cbrc(&["solve", s(&cfg), "-o", s(&out_path)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!out_path.exists());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn solution_round_trips_through_evaluate() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.3, true);
    let sol_path = dir.path().join("sol.json");
    assert_eq!(cbrc(&["solve", s(&cfg), "-o", s(&sol_path)]).status.code(), Some(0));
    let sol: Value = serde_json::from_str(&fs::read_to_string(&sol_path).unwrap()).unwrap();
    let reported = sol["criterion"].as_f64().unwrap();
    let out = cbrc(&["evaluate", s(&cfg), s(&sol_path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.lines().next().unwrap().strip_prefix("criterion ").unwrap().parse().unwrap();
    assert!((value - reported).abs() <= 1e-9 * reported.abs());
    assert!(text.contains("feasible true"));
    assert_eq!(text.lines().filter(|l| l.starts_with("term ")).count(), 2);
}

#[test]
fn evaluate_reports_infinite_zero_design() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.5, false);
    let entries: Vec<String> = (0..51)
        .map(|k| format!(r#"{{"label": "{}", "weight": 0}}"#, k as f64 / 50.0))
        .collect();
    let design = write(&dir, "zero.json", &format!(r#"{{"design": [{}]}}"#, entries.join(",")));
    let out = cbrc(&["evaluate", s(&cfg), s(&design)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("criterion +inf\n"), "{text}");
}

fn design_file(dir: &TempDir, name: &str, w: &[f64]) -> PathBuf {
    let entries: Vec<String> = w
        .iter()
        .enumerate()
        .map(|(k, v)| format!(r#"{{"label": "{}", "weight": {v}}}"#, k as f64 / 50.0))
        .collect();
    write(dir, name, &format!(r#"{{"design": [{}]}}"#, entries.join(",")))
}

#[test]
fn evaluate_matches_direct_formula() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.5, false);
    let mut w = vec![0.0; 51];
    w[0] = 1.0;
    w[50] = 9.0;
    let design = design_file(&dir, "d.json", &w);
    let out = cbrc(&["evaluate", s(&cfg), s(&design)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.lines().next().unwrap().strip_prefix("criterion ").unwrap().parse().unwrap();
    let expected = direct_value(0.5, &w);
    assert!((value - expected).abs() <= 1e-12 * expected, "{value} vs {expected}");
}

#[test]
fn evaluate_checks_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.5, true);
    let mut w = vec![0.0; 51];
    for k in [0, 26, 29, 32, 35, 38, 41, 44, 47, 50] {
        w[k] = 1.0;
    }
    let good = design_file(&dir, "good.json", &w);
    let text = String::from_utf8(cbrc(&["evaluate", s(&cfg), s(&good)]).stdout).unwrap();
    assert!(text.contains("feasible true"), "{text}");
    w[27] = 1.0;
    w[50] = 0.0;
    let bad = design_file(&dir, "bad.json", &w);
    let text = String::from_utf8(cbrc(&["evaluate", s(&cfg), s(&bad)]).stdout).unwrap();
    assert!(text.contains("feasible false"), "{text}");
    assert!(text.contains("violation row 25: 2 <= 1 violated"), "{text}");
}

#[test]
fn evaluate_rejects_foreign_labels() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.5, false);
    let design = write(&dir, "d.json", r#"{"design": [{"label": "elsewhere", "weight": 1}]}"#);
    let out = cbrc(&["evaluate", s(&cfg), s(&design)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_is_deterministic_and_tracks_support() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, true);
    let args = ["sweep", s(&cfg), "--start", "0.113", "--stop", "0.117", "--step", "0.001", "--mode", "exact"];
    let first = cbrc(&args);
    let second = cbrc(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["rho", "status", "criterion", "0"]);
    assert_eq!(header.len(), 3 + 51);
    let col = |x: &str| header.iter().position(|h| *h == x).unwrap();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let rho: f64 = f[0].parse().unwrap();
        assert_eq!(f[1], "optimal");
        let (low, high) = (f[col("0.06")], f[col("0.52")]);
        if rho <= 0.114 {
            assert_eq!((low, high), ("1", "0"), "rho {rho}");
        } else {
            assert_eq!((low, high), ("0", "1"), "rho {rho}");
        }
    }
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, false);
    let out = cbrc(&["sweep", s(&cfg), "--start", "0.2", "--stop", "0.1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(cbrc(&["solve"]).status.code() == Some(4));
}

#[test]
fn infeasible_rows_give_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "inf.json",
        r#"{
            "design_space": [{"label": "a", "coordinate": [0]}, {"label": "b", "coordinate": [1]}],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {"type": "cbrc", "terms": [{"B": [[0, 0], [0, 0]], "H": [[1, 0], [0, 1]]}]},
            "constraints": {
                "total_trials": {"value": 10},
                "rows": [
                    {"coefficients": [1, 0], "relation": "<=", "rhs": 1},
                    {"coefficients": [0, 1], "relation": "<=", "rhs": 1}
                ]
            }
        }"#,
    );
    for mode in ["approximate", "exact"] {
        let (sol, code) = solve_json(&["solve", s(&cfg), "--mode", mode]);
        assert_eq!(code, 2, "{mode}");
        assert_eq!(sol["status"], "infeasible");
    }
}

#[test]
fn node_limit_gives_exit_three() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, false);
    let (sol, code) = solve_json(&["solve", s(&cfg), "--mode", "exact", "--node-limit", "1"]);
    assert_eq!(code, 3);
    assert_eq!(sol["status"], "node-limit");
    assert_eq!(weights(&sol).iter().sum::<f64>(), 10.0);
}

#[test]
fn conic_dump_is_written() {
    let dir = TempDir::new().unwrap();
    let cfg = example(&dir, 0.1, true);
    let dump = dir.path().join("root.txt");
    let out = cbrc(&["solve", s(&cfg), "--dump-conic", s(&dump), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dump).unwrap();
    assert!(text.starts_with("conic-program v1\n"));
    assert!(text.ends_with("end\n"));
}

#[test]
fn rcr_config_matches_builtin_example() {
    let dir = TempDir::new().unwrap();
    let points: Vec<String> = (0..51)
        .map(|k| {
            let x = k as f64 / 50.0;
            format!(r#"{{"label": "{x}", "coordinate": [{x}]}}"#)
        })
        .collect();
    let cfg = write(
        &dir,
        "rcr.json",
        &format!(
            r#"{{
                "design_space": [{}],
                "regression": {{"type": "polynomial", "degree": 1}},
                "criterion": {{"type": "rcr_imse", "n": 100, "D": [[0.01, 0], [0, 0.1111111111111111]]}},
                "constraints": {{"total_trials": {{"relation": "=", "value": 10}}}}
            }}"#,
            points.join(",")
        ),
    );
    let builtin = example(&dir, 0.1, false);
    let (a, _) = solve_json(&["solve", s(&cfg), "--mode", "exact"]);
    let (b, _) = solve_json(&["solve", s(&builtin), "--mode", "exact"]);
    assert_eq!(weights(&a), weights(&b));
    let (va, vb) = (a["criterion"].as_f64().unwrap(), b["criterion"].as_f64().unwrap());
    assert!((va - vb).abs() <= 1e-12 * vb);

    let swept = cbrc(&["sweep", s(&cfg), "--start", "0.1", "--stop", "0.11", "--step", "0.01"]);
    let text = String::from_utf8(swept.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let approx = cbrc(&["solve", s(&builtin)]);
    let sol: Value = serde_json::from_slice(&approx.stdout).unwrap();
    let value: f64 = row[2].parse().unwrap();
    assert!((value - sol["criterion"].as_f64().unwrap()).abs() <= 1e-9 * value);
}
