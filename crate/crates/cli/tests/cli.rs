use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CASE: &str = include_str!("../../../configs/six_bus.case");

fn setup(dir: &Path, scenarios: usize) {
    fs::write(dir.join("six_bus.case"), CASE).unwrap();
    let cfg = format!(
        "case = \"six_bus.case\"\noutput = \"out\"\nscenarios = {scenarios}\nhorizon = 4\n\n\
         [train]\nepochs = 3\npatience = 3\nbatch_size = 4\n"
    );
    fs::write(dir.join("gridrisk.toml"), cfg).unwrap();
}

fn gridrisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridrisk")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gridrisk(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn full_run(dir: &Path) {
    ok(dir, &["sample"]);
    ok(dir, &["label", "--workers", "2"]);
    ok(dir, &["train"]);
    ok(dir, &["assess", "--source", "milp"]);
    ok(dir, &["assess", "--source", "gnn"]);
    let code = gridrisk(dir, &["compare"]).status.code();
    assert!(matches!(code, Some(0 | 1)), "{code:?}");
    ok(dir, &["report"]);
}

#[test]
fn full_pipeline_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        setup(d, 12);
        full_run(d);
    }
    for name in ["scenarios.csv", "labels.csv", "model_shedding.bin", "report_gnn.json", "figures/shed_risk.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn zero_scenarios_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), 12);
    let out = gridrisk(d.path(), &["sample", "-n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn gnn_assessment_needs_checkpoints() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), 8);
    ok(d.path(), &["sample"]);
    ok(d.path(), &["label"]);
    let out = gridrisk(d.path(), &["assess", "--source", "gnn"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_exit_code_follows_thresholds() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), 12);
    full_run(d.path());
    // Identical reports never diverge.
    fs::copy(d.path().join("out/report_milp.json"), d.path().join("out/report_gnn.json")).unwrap();
    assert_eq!(gridrisk(d.path(), &["compare"]).status.code(), Some(0));
}

#[test]
fn overrides_change_the_stage_hash() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), 8);
    let base = ok(d.path(), &["sample"]);
    let seeded = ok(d.path(), &["--set", "seed=9", "sample"]);
    let flag = ok(d.path(), &["--seed", "9", "sample"]);
    let hash = |s: &str| s.lines().find(|l| l.starts_with("config ")).unwrap().to_string();
    assert_ne!(hash(&base), hash(&seeded));
    assert_eq!(hash(&seeded), hash(&flag));
    let bad = gridrisk(d.path(), &["--set", "train.nonsense=1", "sample"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn stale_labels_are_refused() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path(), 8);
    ok(d.path(), &["sample"]);
    ok(d.path(), &["label"]);
    ok(d.path(), &["--seed", "5", "sample"]);
    let out = gridrisk(d.path(), &["--seed", "1", "train", "--head", "shedding"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}
