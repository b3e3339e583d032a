use std::path::Path;
use std::process::{Command, Output};

use funnel_mpc::scenario;
use funnel_mpc_sim::ScenarioFile;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funnel-sim")).args(args).env("FUNNEL_SIM_LOG", "off").output().unwrap()
}

fn write_short(dir: &Path, id: &str, steps: usize) -> String {
    let mut file = ScenarioFile::from_scenario(&scenario::builtin(id).unwrap());
    file.steps = steps;
    let path = dir.join(format!("{id}.json"));
    std::fs::write(&path, file.to_json()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_accepts_the_shipped_files() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let files: Vec<String> = scenario::BUILTIN_IDS.iter().map(|id| format!("{dir}/{id}.json")).collect();
    let mut args = vec!["validate", "--scenario"];
    args.extend(files.iter().map(String::as_str));
    let out = sim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("ok: ")).count(), 4);
}

#[test]
fn validate_rejects_a_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version": 1, "id": "x"}"#).unwrap();
    let out = sim(&["validate", "--scenario", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn run_writes_trajectory_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_short(dir.path(), "slow-traffic", 25);
    let out_dir = dir.path().join("out");
    let out = sim(&["run", "--scenario", &file, "--method", "cec", "--seed", "4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(out_dir.join("slow-traffic_cec_seed4.csv")).unwrap();
    assert_eq!(traj.lines().count(), 26);
    assert!(out_dir.join("slow-traffic_cec_seed4_metrics.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("J^u"));
}

#[test]
fn batch_writes_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scenarios");
    std::fs::create_dir(&scen).unwrap();
    write_short(&scen, "highway", 15);
    write_short(&scen, "tight-entry-curve", 15);
    let out_dir = dir.path().join("out");
    let out = sim(&[
        "batch",
        "--scenarios",
        scen.to_str().unwrap(),
        "--methods",
        "cec,funnel",
        "--seeds",
        "0..2",
        "--rho-sweep",
        "0.3,0.6",
        "--out",
        out_dir.to_str().unwrap(),
        "--svg",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(out_dir.join("runs.csv")).unwrap().lines().count(), 1 + 2 * 2 * 3);
    assert!(out_dir.join("summary.svg").exists());
    assert!(out_dir.join("overlays/overlay_highway_rho0.6_seed1.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("rho sweep"));
}

#[test]
fn bad_arguments_fail() {
    let out = sim(&["run", "--scenario", "nowhere.json", "--method", "lqr", "--out", "x"]);
    assert!(!out.status.success());
    let out = sim(&["run", "--scenario", "nowhere.json", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.json"));
}
