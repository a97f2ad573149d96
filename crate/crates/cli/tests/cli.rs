use std::fs;
use std::process::Command;

fn palpate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_palpate"))
}

#[test]
fn run_writes_outputs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = palpate()
        .args(["run", "--trials", "2", "--budget", "12", "--mode", "discrete", "--strategy", "rs", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("RS+Discrete hemisphere"), "{stdout}");
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "trials = 1\nbudget = 8\nseed = 9\n[probe]\ncf_timeout = 2.0\n").unwrap();
    let out_dir = dir.path().join("run");
    let out = palpate()
        .args(["run", "--shape", "crescent", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["shape"], "crescent");
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["probe"]["cf_timeout"], 2.0);
}

#[test]
fn export_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.ply");
    let out = palpate().args(["export-gt", "--path"]).arg(&gt).output().unwrap();
    assert!(out.status.success());
    let out = palpate()
        .args(["eval", "--recon"])
        .arg(&gt)
        .arg("--gt")
        .arg(&gt)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("F 1.0000"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "budget = 0\n").unwrap();
    let out = palpate().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = palpate().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
