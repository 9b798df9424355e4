use std::process::Command;

fn optiq(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_optiq")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn solve_worked_example() {
    let (code, out) = optiq(&["solve", "--problem", "quadratic_example", "--solver", "optiq", "--eta", "1e-12", "--max-iters", "100"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "iterations: 2"), "{out}");
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["solve", "--problem", "booth", "--solver", "gauss"][..],
        &["solve", "--problem", "banana"],
        &["solve", "--problem", "extended_wood", "--n", "6"],
        &["solve", "--problem", "booth", "--x0", "1,2,3"],
        &["solve", "--problem", "booth", "--eta", "-1"],
        &["bench", "--suite", "/nonexistent/suite.json", "--out", "/tmp/x.csv"],
        &["frobnicate"],
    ] {
        assert_eq!(optiq(args).0, 2, "{args:?}");
    }
}

#[test]
fn run_failure_exits_1() {
    let (code, out) = optiq(&["solve", "--problem", "booth", "--solver", "forward_euler", "--fe-dt", "10"]);
    assert_eq!(code, 1);
    assert!(out.contains("status: diverged"));
    let (code, _) = optiq(&["solve", "--problem", "rosenbrock", "--solver", "newton", "--max-iters", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn diagnose_reports_fe_bound() {
    let (code, out) = optiq(&["diagnose", "--problem", "quadratic_example", "--x0", "0,0"]);
    assert_eq!(code, 0);
    let bound: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("fe_bound: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((bound - 0.009975).abs() < 1e-6);
    assert!(out.contains("lyapunov: 5e-1"));
    assert!(out.contains("time_constants: 9.900990099009901e-3,inadmissible"));
}

#[test]
fn negative_start_coordinates_parse() {
    let (code, out) = optiq(&["solve", "--problem", "booth", "--x0", "-2,-4", "--solver", "newton"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn bench_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    let out = dir.path().join("report.json");
    std::fs::write(&suite, r#"{"problems": [{"name": "booth"}], "solvers": ["optiq", "newton"]}"#).unwrap();
    let (code, _) = optiq(&["bench", "--suite", suite.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json", "--parallel", "2"]);
    assert_eq!(code, 0);
    let report = optiq_bench::BenchmarkReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 2);

    let trace = dir.path().join("trace.csv");
    let (code, _) = optiq(&["solve", "--problem", "quadratic_example", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 3);
}
