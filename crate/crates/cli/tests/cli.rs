use std::fs;
use std::process::Command;

use monoflow_cli::config::ExperimentConfig;
use monoflow_cli::report::{emit_trajectories, Report};
use monoflow_cli::{presets, run};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monoflow"))
}

#[test]
fn ssh_preset_reports_equal_flow_and_index() {
    let rep = run(&presets::load("ssh").unwrap()).unwrap();
    assert_eq!(rep.flow("sf_unitary").unwrap().net(), Some(1));
    assert_eq!(rep.index("fedosov").unwrap().value(), Some(1));
    assert_eq!(rep.oracle("winding").unwrap().value(), Some(1));
    assert!(rep.passed(), "{:#?}", rep.verdicts);
}

#[test]
fn trajectories_are_reproducible() {
    let cfg = presets::load("ssh").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = emit_trajectories(&run(&cfg).unwrap(), a.path()).unwrap();
    let fb = emit_trajectories(&run(&cfg).unwrap(), b.path()).unwrap();
    let csv_a = fs::read(&fa[0]).unwrap();
    assert_eq!(csv_a, fs::read(&fb[0]).unwrap());
    assert!(String::from_utf8_lossy(&csv_a).starts_with("alpha,track,re,im,bulk\n"));
    let json = fs::read_to_string(fa.last().unwrap()).unwrap();
    let back = Report::from_json(&json).unwrap();
    assert_eq!(back.config_hash, cfg.hash());
    assert_eq!(back.config.hash(), cfg.hash());
}

#[test]
fn small_harness_agrees() {
    let mut cfg = presets::load("harness").unwrap();
    cfg.harness.samples = 5;
    cfg.harness.max_dim = 8;
    let rep = run(&cfg).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.flows.len(), 5);
    assert!(rep.indices.iter().all(|e| e.value() == Some(0)));
}

#[test]
fn chirind_flow_is_twice_the_index() {
    let mut cfg = presets::load("chirind").unwrap();
    cfg.lattice.radius = 12;
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.flow("sf_chiral").unwrap().net(), Some(2));
    assert!(rep.passed(), "{:#?}", rep.verdicts);
}

#[test]
fn small_even_model_on_dense_path() {
    let text = r#"
name = "small"
[model]
kind = "even_dirac"
d = 2
mass = 1.0
[box]
radius = 6
"#;
    let rep = run(&ExperimentConfig::from_toml(text).unwrap()).unwrap();
    let sf = rep.flow("sf_half").unwrap().net();
    assert_eq!(sf, rep.index("fedosov").unwrap().value());
    assert_eq!(sf.map(i64::abs), Some(1));
}

#[test]
fn cli_lists_and_prints_presets() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    assert!(names.lines().any(|l| l == "ssh"));
    assert_eq!(names.lines().count(), presets::names().len());
    let out = bin().args(["list-presets", "ssh"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), presets::source("ssh").unwrap());
}

#[test]
fn cli_validate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "name = \"x\"\n[model]\nkind = \"even_dirac\"\nd = 3\n[box]\nradius = 4\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even d"));
    let out = bin().args(["validate", "--preset", "ssh"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn cli_run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--preset", "ssh", "--threads", "1", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("[PASS] SF == Ind"));
    assert!(dir.path().join("ssh_sf_unitary.csv").exists());
    assert!(dir.path().join("ssh.json").exists());
}

#[test]
fn cli_run_exits_nonzero_when_a_verdict_fails() {
    // An evaluation budget too small for the flow: the flow errors and the
    // equality verdict cannot pass.
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    fs::write(&p, "name = \"c\"\n[model]\nkind = \"ssh\"\n[box]\nradius = 10\n[flow]\nmax_evaluations = 3\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&p).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("flow sf_unitary: error"), "{stdout}");
    assert!(stdout.contains("[FAIL] SF == Ind"));
}
