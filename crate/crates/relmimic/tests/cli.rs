use std::process::{Command, Output};

fn relmimic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relmimic")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn prints_default_config() {
    let o = relmimic(&["config"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("variant = non-local-reward"));
}

#[test]
fn reports_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    let o = relmimic(&["train", "--out", out, "--variant", "bogus"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown variant"), "{}", stderr(&o));

    let o = relmimic(&["train", "--out", out, "--set", "resolution=16"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("resolution"), "{}", stderr(&o));

    let o = relmimic(&["train", "--out", out, "--set", "novalue"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("KEY=VALUE"), "{}", stderr(&o));

    let o = relmimic(&["eval", "--checkpoint", "/nonexistent/ck.bin"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/ck.bin"), "{}", stderr(&o));
}

#[test]
fn resolution_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let demos = dir.path().join("d40.bin");
    let o = relmimic(&["demo-record", "--out", demos.to_str().unwrap(), "--episodes", "1", "--resolution", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = relmimic(&[
        "train",
        "--out",
        dir.path().join("run").to_str().unwrap(),
        "--demos",
        demos.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("expected 32, found 40"), "{}", stderr(&o));
}

#[test]
fn record_train_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let o = relmimic(&["demo-record", "--out", &p("demos.bin"), "--episodes", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = relmimic(&[
        "train", "--out", &p("run"), "--demos", &p("demos.bin"), "--variant", "local", "--k", "2",
        "--seeds", "1", "--learners", "1", "--iters", "1", "--set", "steps=8", "--set", "minibatch=4",
        "--set", "rounds=1", "--set", "eval_episodes=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("baseline: final mean progress"), "{}", stdout(&o));
    let cfg = std::fs::read_to_string(p("run/config.txt")).unwrap();
    assert!(cfg.contains("k = 2") && cfg.contains("variant = local"));

    let o = relmimic(&["eval", "--checkpoint", &p("run/seed_0/checkpoint.bin"), "--episodes", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("CCDF area"));

    let o = relmimic(&["report", "--run", &p("run"), "--svg", &p("curves.svg")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("baseline: 1 seeds"));
    assert!(std::fs::read_to_string(p("curves.svg")).unwrap().starts_with("<svg"));
}
