//! End-to-end tests of the `ezport` binary: exit-code contract, emitted
//! files, and byte-identical reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ezport"))
}

fn heston_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
        "preferences": {{"gamma": 5.0, "psi": 1.5, "delta": 0.08}},
        "model": {{"kind": "heston", "r0": 0.05, "r1": 0.0, "lambda": 0.47,
                  "sigma": 1.0, "b": 5.0, "ell": 0.0225, "a": 0.25, "rho": -0.5}}{extra}
    }}"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn run(mut cmd: Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn check_passes_on_the_baseline_heston_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = heston_config(dir.path(), "");
    let out = run({
        let mut c = bin();
        c.arg("check").arg("--config").arg(&cfg);
        c
    });
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("overall: PASS"));
    assert!(stdout.contains("C1e"));
    assert!(stdout.contains("C3"));
}

#[test]
fn check_fails_with_exit_1_when_feller_is_violated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{
        "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.08},
        "model": {"kind": "heston", "r0": 0.05, "r1": 0.0, "lambda": 0.47,
                  "sigma": 1.0, "b": 5.0, "ell": 0.0225, "a": 0.5, "rho": -0.5}
    }"#,
    )
    .unwrap();
    let out = run({
        let mut c = bin();
        c.arg("check").arg("--config").arg(&path);
        c
    });
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ this is not json").unwrap();
    for sub in ["check", "solve", "simulate", "horizon"] {
        let out = run({
            let mut c = bin();
            c.arg(sub).arg("--config").arg(&path);
            c
        });
        assert_eq!(out.status.code(), Some(2), "subcommand {sub}");
    }
}

#[test]
fn missing_config_file_exits_2() {
    let out = run({
        let mut c = bin();
        c.arg("check").arg("--config").arg("/nonexistent/cfg.json");
        c
    });
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kim_omberg_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ko.json");
    fs::write(
        &path,
        r#"{
        "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.0052},
        "model": {"kind": "kim_omberg", "r0": 0.0014, "r1": 0.0, "lambda0": 0.0,
                  "lambda1": 1.0, "sigma": 0.0436, "b": 0.0226, "a": 0.0189,
                  "rho": -0.935}
    }"#,
    )
    .unwrap();
    let out = run({
        let mut c = bin();
        c.arg("check").arg("--config").arg(&path);
        c
    });
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("D4"));
    assert!(stdout.contains("overall: PASS"));
}

#[test]
fn solve_writes_all_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = heston_config(
        dir.path(),
        r#",
        "solver": {"nx": 60, "steps_per_year": 60.0, "horizon": 1.0}"#,
    );
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for out in [&out1, &out2] {
        let res = run({
            let mut c = bin();
            c.arg("solve").arg("--config").arg(&cfg).arg("--out").arg(out);
            c
        });
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["value_surface.csv", "policy_surface.csv", "bounds.txt"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between reruns");
    }
    let head: String = fs::read_to_string(out1.join("value_surface.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(head, "t,x,y,z");
    let phead: String = fs::read_to_string(out1.join("policy_surface.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(phead, "t,x,pi_star,ctilde_star");
}

#[test]
fn solve_constant_model_columns_are_x_independent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.json");
    fs::write(
        &path,
        r#"{
        "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.08},
        "model": {"kind": "constant", "r": 0.05, "lambda": 0.4, "sigma": 0.2,
                  "rho": -0.5},
        "solver": {"nx": 11, "steps_per_year": 200.0, "horizon": 2.0}
    }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run({
        let mut c = bin();
        c.arg("solve").arg("--config").arg(&path).arg("--out").arg(&out);
        c
    });
    assert_eq!(res.status.code(), Some(0));
    // Every time slice must repeat a single y value across its 11 x-nodes.
    let text = fs::read_to_string(out.join("value_surface.csv")).unwrap();
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        rows.push((cells[0].parse().unwrap(), cells[2].parse().unwrap()));
    }
    for chunk in rows.chunks(11) {
        for (_, y) in chunk {
            assert!((y - chunk[0].1).abs() < 1e-12);
        }
    }
}

#[test]
fn simulate_smoke_run_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    fs::write(
        &path,
        r#"{
        "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.08},
        "model": {"kind": "constant", "r": 0.05, "lambda": 0.4, "sigma": 0.2,
                  "rho": 0.0},
        "solver": {"nx": 5, "steps_per_year": 200.0, "horizon": 1.0},
        "simulation": {"n_paths": 50, "dt": 0.004, "seed": 9, "w0": 1.0}
    }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run({
        let mut c = bin();
        c.arg("simulate").arg("--config").arg(&path).arg("--out").arg(&out);
        c
    });
    assert_eq!(
        res.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    for name in ["budget_optimal.json", "budget_perturbed.json"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["pass"], serde_json::Value::Bool(true));
    }
}

#[test]
fn simulate_flag_overrides_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = heston_config(
        dir.path(),
        r#",
        "solver": {"nx": 60, "steps_per_year": 100.0, "horizon": 1.0},
        "simulation": {"n_paths": 40, "dt": 0.01, "seed": 1, "w0": 1.0, "x0": 0.04}"#,
    );
    let out = dir.path().join("out");
    let res = run({
        let mut c = bin();
        c.arg("simulate")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .arg("--paths")
            .arg("60")
            .arg("--seed")
            .arg("77");
        c
    });
    assert_eq!(
        res.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(out.join("budget_optimal.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_paths"], serde_json::json!(60));
}

#[test]
fn horizon_sweep_emits_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = heston_config(
        dir.path(),
        r#",
        "solver": {"nx": 60, "steps_per_year": 60.0},
        "horizon": {"psi": [1.5], "delta": [0.08, 0.03], "t_max": 3.0,
                    "n_points": 6, "x0": 0.04}"#,
    );
    let out = dir.path().join("out");
    let res = run({
        let mut c = bin();
        c.arg("horizon").arg("--config").arg(&cfg).arg("--out").arg(&out);
        c
    });
    assert_eq!(
        res.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(out.join("horizon.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "horizon,psi,delta,ctilde0");
    // 1 psi x 2 delta x 6 points.
    assert_eq!(lines.count(), 12);
}
