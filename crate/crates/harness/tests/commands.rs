use epicycle_harness::manifest::MANIFEST_FILE;
use epicycle_harness::verify::VerifySummary;
use epicycle_harness::{execute, read_manifest, Command, ExperimentSpec, Overrides, RunStatus};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};

fn oracle(lambda: f64) -> String {
    format!(
        r#"{{"n": 1, "centers": [[0.0, 0.0]], "v": [0.0, 0.0],
            "tsb": [{{"kind": "radial_cubic", "params": [1.0, 1.0]}}], "lambda": [{lambda:?}]}}"#
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listed_files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}

fn assert_manifest_complete(dir: &Path) {
    let m = read_manifest(dir).unwrap();
    assert_eq!(m.status, RunStatus::Completed);
    let indexed: Vec<String> = m.outputs.iter().map(|e| e.path.clone()).collect();
    let on_disk: Vec<String> = listed_files(dir).into_iter().filter(|p| p != MANIFEST_FILE).collect();
    assert_eq!(indexed, on_disk);
}

#[test]
fn analyze_oracle_predicts_unit_ring() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "oracle.json", &oracle(0.02));
    let out = tmp.path().join("run");
    execute(&ExperimentSpec::new(Command::Analyze, &cfg, &out)).unwrap();
    let preds = json(&out.join("predictions.json"));
    let preds = preds.as_array().unwrap();
    assert_eq!(preds.len(), 1);
    let rho = preds[0]["root"]["rho_star"].as_f64().unwrap();
    let gamma = preds[0]["root"]["gamma"].as_f64().unwrap();
    assert!((rho - 1.0).abs() < 1e-8, "{rho}");
    assert!((gamma + 2.0).abs() < 1e-8, "{gamma}");
    assert_eq!(preds[0]["stability"], "stable");
    assert!(out.join("profile_k0.csv").exists());
    assert_manifest_complete(&out);
}

#[test]
fn analyze_zero_term_has_no_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{"n": 1, "centers": [[0.0, 0.0]], "v": [0.5, 0.0], "tsb": [{"kind": "zero"}], "lambda": [0.02]}"#;
    let cfg = write_config(tmp.path(), "zero.json", text);
    let out = tmp.path().join("run");
    let outcome = execute(&ExperimentSpec::new(Command::Analyze, &cfg, &out)).unwrap();
    assert_eq!(json(&out.join("predictions.json")), Value::Array(vec![]));
    assert!(outcome.lines.iter().any(|l| l.contains("empty")));
}

#[test]
fn analyze_missing_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "{\n  \"n\": 1,\n  \"centers\": [[0.0, 0.0]],\n  \"tsb\": [{\"kind\": \"zero\"}],\n  \"lambda\": [0.0]\n}";
    let cfg = write_config(tmp.path(), "bad.json", text);
    let out = tmp.path().join("run");
    let err = format!("{:#}", execute(&ExperimentSpec::new(Command::Analyze, &cfg, &out)).unwrap_err());
    assert!(err.contains("`v`"), "{err}");
    assert!(err.contains("line"), "{err}");
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn overrides_are_checked_against_the_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "oracle.json", &oracle(0.02));
    let out = tmp.path().join("run");
    let with = |c, o| ExperimentSpec::new(c, &cfg, &out).with_overrides(o);
    let grid = Overrides { grid_n: Some(80), ..Default::default() };
    assert!(with(Command::Analyze, grid).validate().is_err());
    let quad = Overrides { quadrature_n: Some(32), ..Default::default() };
    assert!(with(Command::Verify, quad).validate().is_err());
    let tol = Overrides { tol: Some(1e-3), ..Default::default() };
    assert!(with(Command::Verify, tol).validate().is_err());
    let periods = Overrides { horizon: Some(12.5), ..Default::default() };
    assert!(with(Command::Sweep, periods).validate().is_err());
    let missing = ExperimentSpec::new(Command::Analyze, tmp.path().join("nope.json"), &out);
    assert!(missing.validate().unwrap_err().to_string().contains("does not exist"));
}

fn verify(lambda: f64, periods: f64) -> (VerifySummary, Vec<String>) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "oracle.json", &oracle(lambda));
    let out = tmp.path().join("run");
    let spec = ExperimentSpec::new(Command::Verify, &cfg, &out).with_overrides(Overrides {
        horizon: Some(periods),
        ..Default::default()
    });
    let outcome = execute(&spec).unwrap();
    assert_manifest_complete(&out);
    let summary: VerifySummary = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    (summary, outcome.lines)
}

#[test]
fn verify_oracle_passes_inside_band() {
    let (s, lines) = verify(0.02, 400.0);
    assert_eq!((s.passed, s.failed), (1, 0));
    let t = s.entries[0].report.as_ref().unwrap().torus.as_ref().unwrap();
    assert!((t.mean_radius - 1.0).abs() < 0.1 * 0.02 * 5.0);
    assert!(lines[0].starts_with("PASS"), "{lines:?}");
}

#[test]
fn verify_repelling_oracle_passes_as_unstable() {
    let (s, lines) = verify(-0.02, 400.0);
    let rep = s.entries[0].report.as_ref().unwrap();
    assert_eq!(format!("{:?}", rep.verdict), "Unstable");
    assert!(rep.agrees);
    assert!(lines[0].starts_with("PASS") && lines[0].contains("unstable"), "{lines:?}");
}

#[test]
fn verify_at_zero_lambda_reports_foliation() {
    let (s, lines) = verify(0.0, 40.0);
    assert!(s.entries[0].agreement.reason.contains("foliated / no isolated torus"));
    assert!(lines[0].contains("foliated / no isolated torus"));
}

fn two_center_sweep(dir: &Path) -> PathBuf {
    let text = r#"{
        "system": {"n": 2, "centers": [[0.0, 0.0], [6.0, 0.0]], "v": [0.0, 0.0],
                   "tsb": [{"kind": "radial_cubic", "params": [1.0, 1.0]},
                           {"kind": "radial_cubic", "params": [1.0, 1.0]}],
                   "lambda": [0.02, 0.0]},
        "pivot": 0,
        "lambda_grid": [0.01, 0.02, 0.04],
        "ratio_grid": [0.0, 0.0005, 0.001],
        "options": {"periods": 120}
    }"#;
    write_config(dir, "sweep.json", text)
}

#[test]
fn sweep_completes_resumes_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_center_sweep(tmp.path());
    let out = tmp.path().join("run");
    let first = execute(&ExperimentSpec::new(Command::Sweep, &cfg, &out)).unwrap();
    let cells = fs::read_to_string(out.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 9);
    assert!(first.lines[0].contains("9 computed"), "{:?}", first.lines);
    let scan = json(&out.join("scan.json"));
    assert!(scan["summary"]["v_hat"].as_f64().unwrap() > 0.0);
    assert_manifest_complete(&out);

    let again = execute(&ExperimentSpec::new(Command::Sweep, &cfg, &out)).unwrap();
    assert!(again.lines[0].contains("0 computed"), "{:?}", again.lines);
    assert_eq!(fs::read_to_string(out.join("cells.csv")).unwrap(), cells);

    let other = tmp.path().join("run2");
    execute(&ExperimentSpec::new(Command::Sweep, &cfg, &other)).unwrap();
    for f in ["cells.csv", "scan.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(other.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_resumes_a_partial_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_center_sweep(tmp.path());
    let out = tmp.path().join("run");
    execute(&ExperimentSpec::new(Command::Sweep, &cfg, &out)).unwrap();
    let full = fs::read_to_string(out.join("cells.csv")).unwrap();
    let partial: Vec<&str> = full.lines().take(5).collect();
    fs::write(out.join("cells.csv"), partial.join("\n") + "\n").unwrap();
    fs::remove_file(out.join(MANIFEST_FILE)).unwrap();
    let again = execute(&ExperimentSpec::new(Command::Sweep, &cfg, &out)).unwrap();
    assert!(again.lines[0].contains("5 computed, 4 reused"), "{:?}", again.lines);
    assert_eq!(fs::read_to_string(out.join("cells.csv")).unwrap(), full);
}

#[test]
fn bidomain_smoke_run_writes_tips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", r#"{"checkpoint_every": 100.0}"#);
    let out = tmp.path().join("run");
    let spec = ExperimentSpec::new(Command::Bidomain, &cfg, &out).with_overrides(Overrides {
        grid_n: Some(60),
        horizon: Some(300.0),
        ..Default::default()
    });
    execute(&spec).unwrap();
    let tips = fs::read_to_string(out.join("tips.csv")).unwrap();
    assert!(tips.lines().count() > 10);
    assert!(tips.lines().skip(1).all(|l| l.split(',').all(|x| x.parse::<f64>().unwrap().is_finite())));
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.config["params"]["grid_n"], 60);
    assert!(m.outputs.iter().any(|e| e.path == "checkpoints/step_00002000.bin"));
    assert!(out.join("verdict.json").exists());
    assert_manifest_complete(&out);

    let other = tmp.path().join("run2");
    execute(&ExperimentSpec::new(Command::Bidomain, &cfg, &other).with_overrides(spec.overrides)).unwrap();
    for f in ["tips.csv", "centers.csv", "verdict.json", "checkpoints/step_00006000.bin"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(other.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bidomain_control_rotates_rigidly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "control.json", r#"{"params": {"epsilon_aniso": 0.0, "tsb_amp": 0.0}}"#);
    let out = tmp.path().join("run");
    let spec = ExperimentSpec::new(Command::Bidomain, &cfg, &out).with_overrides(Overrides {
        horizon: Some(2000.0),
        ..Default::default()
    });
    let outcome = execute(&spec).unwrap();
    let verdict = json(&out.join("verdict.json"));
    assert_eq!(verdict["report"]["verdict"], "rigid_rotation", "{:?}", outcome.lines);
    assert!(outcome.lines[1].contains("rigid rotation"));
}

#[test]
fn bidomain_rejects_tiny_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", r#"{"params": {"grid_n": 8}}"#);
    let out = tmp.path().join("run");
    let err = execute(&ExperimentSpec::new(Command::Bidomain, &cfg, &out)).unwrap_err();
    assert!(err.to_string().contains("below the minimum"), "{err}");
    let flag = ExperimentSpec::new(Command::Bidomain, &cfg, &out).with_overrides(Overrides {
        grid_n: Some(8),
        ..Default::default()
    });
    assert!(flag.validate().is_err());
}

#[test]
fn bidomain_blow_up_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", r#"{"params": {"grid_n": 40, "dt": 4.0}, "horizon": 4000.0}"#);
    let out = tmp.path().join("run");
    let err = execute(&ExperimentSpec::new(Command::Bidomain, &cfg, &out)).unwrap_err();
    assert!(err.to_string().contains("aborted"), "{err}");
    match read_manifest(&out).unwrap().status {
        RunStatus::Aborted { step, .. } => assert!(step > 0),
        s => panic!("{s:?}"),
    }
}
