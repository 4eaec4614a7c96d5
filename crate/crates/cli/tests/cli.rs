use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cxflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxflow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.cfg");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn run_in(dir: &Path, sub: &str, config: &str, out: &str) -> Output {
    let out = dir.join(out).display().to_string();
    cxflow(&[sub, "--config", config, "--out", &out])
}

#[test]
fn eval_writes_rollouts_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "controller = tl\ndemand.count = 150\nrun.horizon = 60\nrun.repeats = 2\n");
    let o = run_in(dir.path(), "eval", &c, "a");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("a");

    let rollout = fs::read_to_string(out.join("rollout_0.csv")).unwrap();
    let mut lines = rollout.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("step,awt_intersection,awt_E-L,"));
    assert!(header.contains(",avg_speed,throughput,conflict_rate_cum,cl_E-L,"));
    assert!(!header.contains("event"));
    assert_eq!(rollout.lines().count(), 61);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), header.split(',').count());
    assert!(first[1].split_once('.').is_some_and(|(_, frac)| frac.len() == 6));
    assert!(out.join("rollout_1.csv").exists());

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "rollout,seed,awt,conflict_rate,throughput,avg_speed,congested,awt_slope_pre,awt_slope_post");
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("mean,"));
    assert!(rows[4].starts_with("std,"));

    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("# cxflow "));
    assert!(manifest.contains("controller = tl"));
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "controller = notl\ndemand.count = 250\ndemand.rv_rate = 0.4\nrun.horizon = 120\n");
    assert!(run_in(dir.path(), "eval", &c, "x").status.success());
    assert!(run_in(dir.path(), "eval", &c, "y").status.success());
    for f in ["rollout_0.csv", "summary.csv", "manifest.txt"] {
        assert_eq!(
            fs::read(dir.path().join("x").join(f)).unwrap(),
            fs::read(dir.path().join("y").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "controller = notl\ndemand.count = 250\nrun.horizon = 120\n");
    let out = dir.path().join("s").display().to_string();
    assert!(cxflow(&["eval", "--config", &c, "--out", &out, "--seed", "99"]).status.success());
    let manifest = fs::read_to_string(dir.path().join("s/manifest.txt")).unwrap();
    assert!(manifest.contains("run.seed = 99"));
}

#[test]
fn bad_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "controller = tl\ndemand.count = -5\n");
    let o = run_in(dir.path(), "eval", &c, "bad");
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("demand.count"), "{err}");
    assert!(err.contains('2'), "{err}");
}

#[test]
fn policy_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "controller = policy\nrun.horizon = 10\n");
    assert!(!run_in(dir.path(), "eval", &c, "p").status.success());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "controller = notl\nrun.horizon = 100\nsweep.axis = demand\nsweep.values = 100, 300\n",
    );
    let o = run_in(dir.path(), "sweep", &c, "w");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = fs::read_to_string(dir.path().join("w/sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "value,awt,congested,avg_speed");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("100"));
    assert!(rows[2].starts_with("300"));
}

#[test]
fn scenario_adds_event_column() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "controller = tl\nrun.horizon = 80\nevent.0.kind = rv_drop\nevent.0.at_step = 40\nevent.0.target_rate = 0.2\n",
    );
    assert!(run_in(dir.path(), "scenario", &c, "e").status.success());
    let rollout = fs::read_to_string(dir.path().join("e/rollout_0.csv")).unwrap();
    assert!(rollout.lines().next().unwrap().ends_with(",event"));
}

#[test]
fn train_writes_checkpoint_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "controller = policy\ndemand.count = 150\nlearn.episodes = 1\nlearn.episode_steps = 30\nlearn.warmup = 8\nlearn.batch = 4\n",
    );
    let o = run_in(dir.path(), "train", &c, "t");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("t/checkpoint.cxf").exists());
    let curves = fs::read_to_string(dir.path().join("t/curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), "epoch,cumulative_wait,conflicts,decisions,epsilon,steps,early_stop");
    assert_eq!(curves.lines().count(), 2);
}
