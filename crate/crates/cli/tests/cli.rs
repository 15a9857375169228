use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tvflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("TVFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workdir_with_signal(values: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("in.csv"), values).unwrap();
    dir
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flow_writes_event_times() {
    let dir = workdir_with_signal("0\n2\n1\n");
    let out = tvflow(dir.path(), &["flow", "in.csv", "--out", "flow.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&dir.path().join("flow.json"));
    let times: Vec<f64> = v["times"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    assert_eq!(times.len(), 2);
    assert!((times[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((times[1] - 1.0).abs() < 1e-12);
}

#[test]
fn flow_json_round_trips_the_input_exactly() {
    let text = "0.1\n0.30000000000000004\n1e-7\n0.7071067811865476\n";
    let dir = workdir_with_signal(text);
    assert!(tvflow(dir.path(), &["flow", "in.csv", "--out", "flow.json"]).status.success());
    let v = read_json(&dir.path().join("flow.json"));
    let initial: Vec<f64> = v["initial"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    let input: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(initial, input);
}

#[test]
fn spectrum_from_flow_json() {
    let dir = workdir_with_signal("0\n2\n1\n");
    assert!(tvflow(dir.path(), &["flow", "in.csv", "--out", "flow.json"]).status.success());
    let out = tvflow(dir.path(), &["spectrum", "flow.json", "--out", "spec.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("spec.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,mass"));
    let times: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(times.len(), 2);
    assert!((times[0] - 1.0 / 3.0).abs() < 1e-12 && (times[1] - 1.0).abs() < 1e-12);
}

#[test]
fn filter_band_with_percent_edges() {
    let dir = workdir_with_signal("0,2,1");
    let out = tvflow(dir.path(), &["filter", "in.csv", "--band", "0%:50%", "--verify"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("verify"));
    let values: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    for (a, b) in values.iter().zip([0.0, 0.5, -0.5]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn rdmd_reports_components() {
    let dir = workdir_with_signal("0\n2\n1\n");
    let out = tvflow(dir.path(), &["rdmd", "in.csv", "--out", "r.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = read_json(&dir.path().join("r.json"));
    assert_eq!(v["segments"].as_array().unwrap().len(), 2);
    assert!(v["relative_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["components"]["lambdas"].as_array().unwrap().len(), 2);
}

#[test]
fn numerical_failure_exits_with_2() {
    let dir = workdir_with_signal("0\n2\n1\n");
    let out = tvflow(dir.path(), &["rdmd", "in.csv", "--dt", "10"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("samples"));
}

#[test]
fn malformed_csv_exits_with_1_and_names_the_line() {
    let dir = workdir_with_signal("0\n2\nabc\n");
    let out = tvflow(dir.path(), &["flow", "in.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn malformed_pgm_names_the_byte() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("img.pgm"), "P2 2 1 255\n3 z\n").unwrap();
    let out = tvflow(dir.path(), &["flow2d", "img.pgm", "--out", "traj"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("byte 13"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_1() {
    let dir = workdir_with_signal("0\n1\n");
    assert_eq!(tvflow(dir.path(), &["flow"]).status.code(), Some(1));
    assert_eq!(tvflow(dir.path(), &["filter", "in.csv", "--band", "2:1"]).status.code(), Some(1));
    assert_eq!(
        tvflow(dir.path(), &["flow2d", "in.csv", "--delta", "2", "--out", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(tvflow(dir.path(), &["flow", "missing.csv"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_tvflow"))
        .args(["flow", "in.csv"])
        .current_dir(dir.path())
        .env("TVFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(tvflow(dir.path(), &["--help"]).status.success());
}

#[test]
fn kmd_is_deterministic_per_seed() {
    let dir = workdir_with_signal("0\n2\n1\n");
    let run = |seed: &str, out: &str| {
        let o = tvflow(
            dir.path(),
            &["kmd", "in.csv", "--noise", "1e-3", "--seed", seed, "--atoms", "40", "--out", out],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("7", "a.json"), run("7", "b.json"));
    assert_ne!(run("7", "a.json"), run("8", "c.json"));
    let v = read_json(&dir.path().join("a.json"));
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 3);
}

#[test]
fn kmd_recovers_rates_on_the_grid() {
    let dir = workdir_with_signal("0\n2\n1\n");
    // Grid step 0.25 contains both -1 and -3.
    let out = tvflow(dir.path(), &["kmd", "in.csv", "--atoms", "16", "--rate-max", "4", "--out", "k.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = read_json(&dir.path().join("k.json"));
    let mut lambdas: Vec<f64> = v["lambdas"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    lambdas.sort_by(f64::total_cmp);
    assert_eq!(lambdas, vec![-3.0, -1.0, 0.0]);
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn flow2d_writes_frames_and_index() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("img.csv"), "1,0\n0,0\n").unwrap();
    let out = tvflow(dir.path(), &["flow2d", "img.csv", "--out", "traj", "--verify"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let index = read_json(&dir.path().join("traj/index.json"));
    let times = index["times"].as_array().unwrap();
    assert_eq!(times[0].as_f64(), Some(0.0));
    assert!((times[1].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    for name in index["frames"].as_array().unwrap() {
        assert!(dir.path().join("traj").join(name.as_str().unwrap()).exists());
    }
}

#[test]
fn bands2d_sum_to_the_image() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("img.csv"), "0,0,1,1\n0,1,1,0\n2,0,0,0\n").unwrap();
    let out = tvflow(
        dir.path(),
        &["bands2d", "img.csv", "--band", "0%:20%", "--band", "20%:200%", "--out", "bands"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let index = read_json(&dir.path().join("bands/index.json"));
    let mean = index["mean"].as_f64().unwrap();
    let read = |name: &str| -> Vec<f64> {
        fs::read_to_string(dir.path().join("bands").join(name))
            .unwrap()
            .split([',', '\n'])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().unwrap())
            .collect()
    };
    let mut sum = read("residual.csv");
    for f in ["band_00.csv", "band_01.csv"] {
        sum.iter_mut().zip(read(f)).for_each(|(s, b)| *s += b);
    }
    let image = [0., 0., 1., 1., 0., 1., 1., 0., 2., 0., 0., 0.];
    for (s, x) in sum.iter().zip(image) {
        assert!((s + mean - x).abs() < 1e-9);
    }
}

#[test]
fn bench_report_has_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvflow(
        dir.path(),
        &["bench", "--length", "64", "--repeats", "1", "--seed", "3", "--out", "report.json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("speedup"));
    let v = read_json(&dir.path().join("report.json"));
    assert!(v["speedup"].as_f64().unwrap() > 0.0);
    assert_eq!(v["length"].as_u64(), Some(64));
}
