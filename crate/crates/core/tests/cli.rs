use std::path::Path;
use std::process::{Command, Output};

fn highway(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_highway")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn fixed_point_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = highway(
        &["fixed-point", "--operator", "highway_generalized", "--n", "1,4", "--out", "fp.csv", "--check"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fp.csv")).unwrap();
    assert!(csv.starts_with("experiment,env,algorithm,seed,metric,x,y,flag\n"));
    assert!(csv.contains(
        "fixed_point,three_fork,highway_generalized/all_forks,0,q_start_up,4.0000000000000000e0,9.0000000000000000e0,1"
    ));
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&highway(&["fixed-point", "--operator", "nope"], dir.path())), 1);
    assert_eq!(code(&highway(&["fixed-point", "--bogus-flag"], dir.path())), 1);
    assert_eq!(code(&highway(&["run", "missing.json"], dir.path())), 1);
    std::fs::write(dir.path().join("bad.json"), r#"{"id":"b","kind":"toy_tasks","seeds":[0]}"#).unwrap();
    let out = highway(&["run", "bad.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("env"));
    std::fs::write(dir.path().join("empty.csv"), "experiment,env,algorithm,seed,metric,x,y,flag\n").unwrap();
    assert_eq!(code(&highway(&["report", "empty.csv", "--out-dir", "rep"], dir.path())), 1);
    assert!(!dir.path().join("rep").exists());
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        highway(&["fixed-point", "--operator", "multistep_bo", "--n", "3", "--max-iters", "2", "--check"], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn preset_check_prints_the_criterion_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = highway(&["run", "c04_highway_equation", "--check", "--out", "c4.csv"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS criterion  4"));
}

#[test]
fn toy_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "toy",
        "--task",
        "traceback",
        "--delay",
        "3,5",
        "--agents",
        "hql,monte_carlo",
        "--seeds",
        "3",
        "--out",
        "toy.csv",
    ];
    assert_eq!(code(&highway(&args, dir.path())), 0);
    let out = highway(&["report", "toy.csv", "--out-dir", "rep"], dir.path());
    assert_eq!(code(&out), 0);
    let summary = std::fs::read_to_string(dir.path().join("rep/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
}

#[test]
fn exported_env_feeds_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&highway(&["export-env", "--env", "random:6:2:0.9:3", "--out", "r.json"], dir.path())), 0);
    let out = highway(
        &["fixed-point", "--env", "r.json", "--operator", "highway_optimality", "--n", "2", "--check"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
