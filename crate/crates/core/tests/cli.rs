use std::path::Path;
use std::process::{Command, Output};

fn tiermem(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiermem")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = tiermem(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    for name in tiermem::scenario::Scenario::preset_names() {
        assert!(out.contains(name), "{name} missing from {out}");
    }
}

#[test]
fn run_writes_fixed_file_names() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = tiermem::scenario::Scenario::preset("calib_cxl").unwrap();
    sc.duration_cycles = 30_000;
    std::fs::write(dir.path().join("s.json"), sc.to_json_pretty()).unwrap();
    let o = tiermem(&["run", "s.json", "--out", "res", "--event-log", "--seed", "9"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["metrics.csv", "summary.json", "controller.csv", "events.csv"] {
        assert!(dir.path().join("res").join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("res/summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 9"), "{summary}");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tiermem(&["run", "scenarios/nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig4_corun"), "{}", stderr(&o));
}

#[test]
fn invalid_placement_names_the_workload() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = tiermem::scenario::Scenario::preset("fig4_corun").unwrap();
    sc.workloads[1].socket = 5;
    std::fs::write(dir.path().join("bad.json"), sc.to_json_pretty()).unwrap();
    let o = tiermem(&["run", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&sc.workloads[1].name), "{}", stderr(&o));
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{\"name\": ").unwrap();
    let o = tiermem(&["run", "broken.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("file"), "").unwrap();
    let o = tiermem(&["run", "calib_ddr", "--out", "file/sub"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_flag_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = tiermem(&["run", "calib_ddr", "--controller", "sometimes"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
