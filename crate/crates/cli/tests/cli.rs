use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spinbath_cli::output::{convention_hash, parse_echo_csv, read_run};
use spinbath_cli::sweep::{PointStatus, SweepIndex};

fn spinbath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn echo_values(dir: &Path) -> Vec<f64> {
    parse_echo_csv(&fs::read_to_string(dir.join("echo.csv")).unwrap()).unwrap().1
}

const ISING: &str = r#"
[model]
family = "xy"
n = 8
gamma = 1.0
lambda = 0.7
[coupling]
epsilon = 0.25
site = 3
[time]
t_max = 5.0
steps = 51
"#;

#[test]
fn zero_coupling_gives_all_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(&tmp.path().join("c.toml"), &ISING.replace("epsilon = 0.25", "epsilon = 0.0"));
    let out_dir = tmp.path().join("run");
    let out = spinbath(&["echo", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("echo.csv")).unwrap();
    assert!(csv.starts_with("t,loschmidt\n"));
    let values = echo_values(&out_dir);
    assert_eq!(values.len(), 51);
    assert!(values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn meta_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(&tmp.path().join("c.toml"), ISING);
    let first = tmp.path().join("a");
    assert_eq!(code(&spinbath(&["echo", "--config", &cfg, "--output", first.to_str().unwrap()])), 0);
    let (meta, series) = read_run(&first).unwrap();
    assert_eq!(meta.convention_hash, convention_hash());
    assert_eq!(meta.engine_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(meta.config.seed, spinbath_cli::config::DEFAULT_SEED);
    let replay = write(&tmp.path().join("replay.toml"), &toml::to_string(&meta.config).unwrap());
    let second = tmp.path().join("b");
    assert_eq!(code(&spinbath(&["echo", "--config", &replay, "--output", second.to_str().unwrap()])), 0);
    assert_eq!(echo_values(&second), series.values);
    let (meta2, _) = read_run(&second).unwrap();
    assert_eq!(meta2.config_sha256, meta.config_sha256);
}

#[test]
fn determinant_on_xxz_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ISING
        .replace("family = \"xy\"", "family = \"xxz\"")
        .replace("gamma = 1.0", "delta = 0.5")
        .replace("lambda = 0.7", "");
    let cfg = write(&tmp.path().join("c.toml"), &text);
    let out_dir = tmp.path().join("run");
    let out = spinbath(&["echo", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("determinant"));
    assert!(!out_dir.join("echo.csv").exists());

    let out = spinbath(&["echo", "--config", &cfg, "--output", out_dir.to_str().unwrap(), "--method", "exact"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_key_and_missing_output_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(&tmp.path().join("c.toml"), &format!("{ISING}\n[tebd]\nchi = 4\n"));
    assert_eq!(code(&spinbath(&["echo", "--config", &cfg, "--output", "x"])), 1);
    let cfg = write(&tmp.path().join("d.toml"), ISING);
    assert_eq!(code(&spinbath(&["echo", "--config", &cfg])), 1);
    assert_eq!(code(&spinbath(&["echo", "--config", "/nonexistent.toml", "--output", "x"])), 1);
}

#[test]
fn sweep_of_one_point_matches_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(&tmp.path().join("c.toml"), ISING);
    let run = tmp.path().join("run");
    assert_eq!(code(&spinbath(&["echo", "--config", &cfg, "--output", run.to_str().unwrap()])), 0);
    let template: toml::Table = toml::from_str(ISING).unwrap();
    let mut sweep = toml::Table::new();
    sweep.insert("template".into(), toml::Value::Table(template));
    let scfg = write(&tmp.path().join("s.toml"), &toml::to_string(&sweep).unwrap());
    let sdir = tmp.path().join("sweep");
    let out = spinbath(&["sweep", "--config", &scfg, "--output", sdir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 points"));
    assert_eq!(echo_values(&sdir.join("point-0000")), echo_values(&run));
}

#[test]
fn failed_points_are_recorded_and_exit_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "[template]\n{}\n[axes]\n\"model.lambda\" = [0.5, 0.0, 1.5]\n\"coupling.epsilon\" = [0.1]\n",
        ISING.replace("[model]", "[template.model]")
            .replace("[coupling]", "[template.coupling]")
            .replace("[time]", "[template.time]")
    );
    let scfg = write(&tmp.path().join("s.toml"), &text);
    let sdir = tmp.path().join("sweep");
    let out = spinbath(&["sweep", "--config", &scfg, "--output", sdir.to_str().unwrap(), "--workers", "2"]);
    // λ = 0 Ising has a degenerate ground state, rejected by the default policy.
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let index = SweepIndex::load(&sdir).unwrap();
    assert_eq!((index.total, index.completed, index.failed), (3, 2, 1));
    assert_eq!(index.points[1].status, PointStatus::Failed);
    assert!(index.points[1].error.as_deref().unwrap().contains("zero mode"));
    assert_eq!(index.points[2].parameters["model.lambda"], Value::from(1.5));

    let out = spinbath(&["analyze", "--input", sdir.to_str().unwrap(), "--which", "plateau"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(sdir.join("analysis-plateau.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
    assert!(report[0]["report"]["l_inf"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyses_report_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ISING.replace("t_max = 5.0\nsteps = 51", "t_max = 0.05\nsteps = 26");
    let cfg = write(&tmp.path().join("c.toml"), &text);
    let run = tmp.path().join("run");
    assert_eq!(code(&spinbath(&["echo", "--config", &cfg, "--output", run.to_str().unwrap()])), 0);
    let report_path = tmp.path().join("g.json");
    let out = spinbath(&[
        "analyze",
        "--input",
        run.to_str().unwrap(),
        "--which",
        "gaussian",
        "--output",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let alpha = report["fit"]["alpha"].as_f64().unwrap();
    let predicted = report["predicted_alpha"].as_f64().unwrap();
    assert!((alpha / predicted - 1.0).abs() < 0.02, "{alpha} vs {predicted}");

    let out = spinbath(&["analyze", "--input", run.to_str().unwrap(), "--which", "critical"]);
    assert_eq!(code(&out), 1);
    let out = spinbath(&["analyze", "--input", run.to_str().unwrap(), "--which", "nonsense"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn compile_gates_writes_sequence_and_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        &tmp.path().join("c.toml"),
        &ISING.replace("n = 8", "n = 4").replace("site = 3", "site = 1"),
    );
    let dir = tmp.path().join("gates");
    let out = spinbath(&["compile-gates", "--config", &cfg, "--tau", "0.05", "--verify", "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("gates.txt")).unwrap();
    let seq = spinbath::gates::GateSequence::from_text(&text).unwrap();
    assert!(seq.respects_addressing());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("verification.json")).unwrap()).unwrap();
    let ratio = v["halving_ratio"].as_f64().unwrap();
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");

    let big = write(&tmp.path().join("big.toml"), &ISING.replace("site = 3", "site = 1"));
    let out = spinbath(&["compile-gates", "--config", &big, "--tau", "0.05", "--verify", "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let out = spinbath(&["compile-gates", "--config", &cfg, "--tau", "0.05", "--output", tmp.path().join("g2").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(!tmp.path().join("g2/verification.json").exists());
}

#[test]
fn oracle_check_writes_calibration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinbath(&["oracle-check", "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("calibration.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["convention_hash"].as_str().unwrap(), convention_hash());
    assert!(report["checks"].as_array().unwrap().len() >= 10);
}
