//! End-to-end runs of the `spo` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spo_core::cli::{RunRecord, RunReport};

fn spo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn spo")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_sensing_reduced_improves_on_presolve() {
    let dir = tempfile::tempdir().unwrap();
    let out = spo(
        &["solve", "--problem", "family:sensing:n=64,m=32,p=4,s=8", "--rho", "1", "--op", "red", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let report: RunReport = serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report.schema, "v1");
    assert!(report.result.converged());
    assert!(report.result.objective <= report.presolve.objective);
    assert!(!report.split_variables);
    assert!(stdout(&out).contains("[converged]"));
}

#[test]
fn solve_comp_on_free_problem_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out = spo(&["solve", "--problem", "sensing:seed=4", "--op", "comp", "--json"], dir.path());
    assert!(matches!(code(&out), 0 | 2));
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().contains("(split)"));
    let json: Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    assert_eq!(json["split_variables"], Value::Bool(true));
    assert_eq!(json["result"]["split_variables"], Value::Bool(true));
    assert_eq!(json["result"]["final_point"]["x"].as_array().unwrap().len(), 64);
    assert_eq!(json["options"]["step_safety"], Value::String("inf".into()));
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&spo(&["solve", "--problem", "portfolio", "--frobnicate"], dir.path())), 64);
    assert_eq!(code(&spo(&["solve", "--problem", "missing.json"], dir.path())), 66);
    assert_eq!(code(&spo(&["solve", "--problem", "portfolio:n=5,zeta=1"], dir.path())), 64);
    assert_eq!(code(&spo(&["solve", "--problem", "portfolio:n=5", "--op", "sideways"], dir.path())), 64);
    fs::write(dir.path().join("bad.json"), "{\"kind\": \"sensing\", \"rho\": 1}").unwrap();
    assert_eq!(code(&spo(&["solve", "--problem", "bad.json"], dir.path())), 65);
    assert_eq!(code(&spo(&["--help"], dir.path())), 0);
}

#[test]
fn gen_is_reproducible_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let a = spo(&["gen", "sensing", "n=512", "m=128", "p=8", "s=32", "seed=3"], dir.path());
    assert_eq!(code(&a), 0);
    let line = stdout(&a);
    let id = line.split_whitespace().next().unwrap().to_string();
    let file = dir.path().join(format!("{id}.json"));
    let first = fs::read_to_string(&file).unwrap();
    let json: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(json["kind"], "sensing");
    assert_eq!(json["a"].as_array().unwrap().len(), 128);
    assert_eq!(json["a"][0].as_array().unwrap().len(), 512);
    assert_eq!(json["c"].as_array().unwrap().len(), 8);
    assert_eq!(json["seed"], 3);

    let b = spo(&["gen", "--family", "sensing", "--params", "n=512,m=128,p=8,s=32", "--seed", "3", "--out", "again.json"], dir.path());
    assert_eq!(code(&b), 0);
    assert!(stdout(&b).starts_with(&id));
    assert_eq!(fs::read_to_string(dir.path().join("again.json")).unwrap(), first);

    assert_eq!(code(&spo(&["gen", "sensing", "n=8", "s=9"], dir.path())), 64);
    assert_eq!(code(&spo(&["gen", "sensing", "n=eight"], dir.path())), 64);
}

#[test]
fn check_reports_on_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&spo(&["gen", "portfolio", "n=20", "seed=2", "--out", "p.json"], dir.path())), 0);
    let solved = spo(&["solve", "--problem", "p.json", "--op", "comp", "--out", "run"], dir.path());
    assert_eq!(code(&solved), 0, "{}", stdout(&solved));
    let out = spo(&["check", "--problem", "p.json", "--point", "run/report.json", "--op", "comp"], dir.path());
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(json["sstat"].as_f64().unwrap() <= 1e-6);
    assert_eq!(json["licq"]["holds"], Value::Bool(true));
    assert!(json["bd"]["elements_checked"].as_u64().unwrap() >= 1);

    let only = spo(&["check", "--problem", "p.json", "--point", "run/report.json", "--checks", "sstat"], dir.path());
    let json: Value = serde_json::from_str(&stdout(&only)).unwrap();
    assert!(json.get("licq").is_none() && json.get("sstat").is_some());

    assert_eq!(code(&spo(&["check", "--problem", "p.json", "--point", "nowhere.json"], dir.path())), 66);
    fs::write(dir.path().join("short.json"), "[0.5, 0.5]").unwrap();
    assert_eq!(code(&spo(&["check", "--problem", "p.json", "--point", "short.json"], dir.path())), 65);
}

/// `x ≥ 0` written as inequalities: SP-LICQ cannot hold at a zero component.
#[test]
fn check_licq_fails_with_bounds_in_g() {
    let dir = tempfile::tempdir().unwrap();
    let problem = r#"{"kind": "quadratic", "rho": 1,
        "q": [[1, 0], [0, 1]], "c": [-1, 0],
        "a_in": [[-1, 0], [0, -1]], "b_in": [0, 0]}"#;
    fs::write(dir.path().join("q.json"), problem).unwrap();
    fs::write(dir.path().join("x.json"), r#"{"x": [1, 0]}"#).unwrap();
    let out = spo(&["check", "--problem", "q.json", "--point", "x.json", "--checks", "licq"], dir.path());
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["licq"]["holds"], Value::Bool(false));
}

fn bench(dir: &Path, jobs: &str, out: &str) -> Output {
    spo(
        &[
            "bench", "--family", "sensing", "--params", "n=64,m=32,p=4,s=8", "--rho-list", "0.1,1", "--runs", "20",
            "--jobs", jobs, "--no-wall-time", "--out", out,
        ],
        dir,
    )
}

#[test]
fn bench_sweep_outputs_are_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = bench(dir.path(), "1", "a");
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = bench(dir.path(), "3", "b");
    assert_eq!(code(&b), 0);

    for file in ["runs.csv", "aggregate.csv", "chart.svg"] {
        let fa = fs::read_to_string(dir.path().join("a").join(file)).unwrap();
        let fb = fs::read_to_string(dir.path().join("b").join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs between --jobs 1 and --jobs 3");
    }

    let agg = fs::read_to_string(dir.path().join("a/aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    let header = lines.next().unwrap();
    assert!(header.split(',').any(|c| c == "failure_rate"));
    assert_eq!(lines.count(), 2 * 3);

    let runs = fs::read_to_string(dir.path().join("a/runs.csv")).unwrap();
    assert_eq!(
        runs.lines().next().unwrap(),
        "instance_id,family,n,m,p,rho,op,status,iters,f0_obj,final_obj,l0_before,l0_after,wall_ms"
    );
    let mut reader = csv::Reader::from_reader(runs.as_bytes());
    let records: Vec<RunRecord> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2 * 20 * 3);

    // Every row is recoverable from its report file.
    for rec in &records {
        let path = dir.path().join("a/reports").join(format!("{}-{}.json", rec.instance_id, rec.op));
        let report: RunReport = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        let again = RunRecord::from_report(&report);
        assert_eq!(again.instance_id, rec.instance_id);
        assert_eq!((again.status.as_str(), again.iters, again.l0_before, again.l0_after), (rec.status.as_str(), rec.iters, rec.l0_before, rec.l0_after));
        assert_eq!(again.f0_obj.to_bits(), rec.f0_obj.to_bits());
        assert!(again.final_obj.to_bits() == rec.final_obj.to_bits() || (again.final_obj.is_nan() && rec.final_obj.is_nan()));
    }

    let svg = fs::read_to_string(dir.path().join("a/chart.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("presolve"));
}

#[test]
fn bench_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = spo(&["bench", "--family", "sensing", "--params", "n=4,s=9", "--runs", "1", "--out", "x"], dir.path());
    assert_eq!(code(&out), 64);
    let out = spo(&["bench", "--family", "portfolio", "--params", "seed=3", "--runs", "1", "--out", "x"], dir.path());
    assert_eq!(code(&out), 64);
}
