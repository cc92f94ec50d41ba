use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn semnet(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_semnet"));
    cmd.args(args).env_remove("SEMNET_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const ONE_BY_ONE: &str = r#"{
  "topology": {
    "users": [{ "x": 0.0, "y": 0.0, "f_max_ghz": 2.5 }],
    "edges": [{ "x": 600.0, "y": 0.0 }]
  }
}"#;

#[test]
fn solve_single_pair_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "one.json", ONE_BY_ONE);
    let out = semnet(&["solve", "--config", &cfg, "--tmax", "10", "--qmin", "0.8"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);

    let delta = (0.8 - 0.1006) / 0.873;
    let gain = 1e-3 / 600f64.powi(3);
    let noise = 10f64.powf(-17.4) * 1e-3;
    let rate = 20e6 * (1.0 + gain / (20e6 * noise)).log2();
    let t_tr = delta * 12544.0 / rate;
    let f = 3e7 / (10.0 - t_tr);
    let energy = 1e-28 * 3e7 * f * f + t_tr * 1.0;

    let sol = &v["solution"];
    let total = sol["energy"]["total_j"].as_f64().unwrap();
    assert!((total - energy).abs() / energy < 1e-9, "{total} vs {energy}");
    assert!((sol["decisions"]["f"]["data"][0].as_f64().unwrap() - f).abs() / f < 1e-9);
    assert!((sol["decisions"]["delta"]["data"][0].as_f64().unwrap() - delta).abs() < 1e-12);
    assert_eq!(v["feasible"], Value::Bool(true));
    assert_eq!(v["manifest"]["seeds"][0].as_u64(), Some(0));
}

#[test]
fn infeasible_single_solve_exits_3() {
    let out = semnet(&["solve", "--tmax", "0.001"], &[]);
    assert_eq!(out.status.code(), Some(3));
    let out = semnet(&["solve", "--qmin", "0.99"], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{ "sytem": {} }"#);
    assert_eq!(semnet(&["solve", "--config", &bad], &[]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        semnet(&["solve", "--config", missing.to_str().unwrap()], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(semnet(&["solve", "--method", "nearest"], &[]).status.code(), Some(2));
    let out = dir.path().join("s.csv");
    let out = out.to_str().unwrap();
    assert_eq!(
        semnet(
            &["sweep-tmax", "--reps", "1", "--out", out],
            &[("SEMNET_THREADS", "many")]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        semnet(&["sweep-tmax", "--reps", "1", "--values", "3,2", "--out", out], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        semnet(&["sweep-tmax", "--reps", "0", "--out", out], &[]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_output_is_byte_identical_and_documented() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |p: &Path, threads: &str| {
        let out = semnet(
            &["sweep-tmax", "--reps", "2", "--seed", "7", "--out", p.to_str().unwrap()],
            &[("SEMNET_THREADS", threads)],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&a, "1");
    run(&b, "3");
    let (ca, cb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,sweep_kind,threshold,seed,feasible,e_comp_user_j,e_trans_j,e_comp_edge_j,total_j,iterations,converged,solve_ms"
    );
    assert_eq!(lines.count(), 3 * 10 * 2);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([7, 8]));
    assert_eq!(manifest["config"]["population"]["n_users"], 20);
    assert_eq!(manifest["sweep"]["kind"], "tmax");
    let summary = fs::read_to_string(dir.path().join("a.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 10);
}

#[test]
fn qos_sweep_honours_values_and_methods() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("q.csv");
    let out = semnet(
        &[
            "sweep-qmin",
            "--reps",
            "1",
            "--values",
            "0.5,0.9736",
            "--methods",
            "proposed,random",
            "--out",
            p.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&p).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("proposed,qmin,0.5,0,true,"));
    assert!(rows[3].starts_with("random,qmin,0.9736,0,true,"));
}

#[test]
fn oracle_check_agrees_on_default_small_instances() {
    let out = semnet(&["oracle-check", "--instances", "4"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["all_agree"], Value::Bool(true));
    assert_eq!(v["comparisons"].as_array().unwrap().len(), 4);
    assert_eq!(v["comparisons"][0]["solver_assignment"].as_array().unwrap().len(), 3);
}

#[test]
fn oracle_check_refuses_oversized_instances() {
    let out = semnet(
        &["oracle-check", "--users", "12", "--edges", "4", "--instances", "1"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_recovers_exact_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("delta,accuracy,t_user_s,t_edge_s,f_hz\n");
    for i in 1..=10 {
        let d = i as f64 / 10.0;
        csv.push_str(&format!("{d},{},{},{},1e9\n", 0.873 * d + 0.1006, 0.01, 0.02));
    }
    let samples = write(dir.path(), "samples.csv", &csv);
    let out = semnet(&["calibrate", "--samples", &samples], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert!((v["qos"]["slope"].as_f64().unwrap() - 0.873).abs() < 1e-9);
    assert!((v["qos"]["intercept"].as_f64().unwrap() - 0.1006).abs() < 1e-9);
    assert!((v["cycles"]["y1_cycles"].as_f64().unwrap() - 1e7).abs() < 1e-3);
    assert!((v["cycles"]["y2_cycles"].as_f64().unwrap() - 2e7).abs() < 1e-3);

    let bad = write(dir.path(), "bad.csv", "delta,accuracy\n1.5,0.9\n0.5,0.5\n");
    assert_eq!(semnet(&["calibrate", "--samples", &bad], &[]).status.code(), Some(2));
}
