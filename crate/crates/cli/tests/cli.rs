use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qinc::data::{read_feature_csv, SplitName};
use qinc::gen::ScenarioConfig;
use qinc_cli::{cmd_experiment, cmd_gen, CliError, ExperimentConfig};
use serde_json::Value;

fn qinc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinc"))
        .args(args)
        .env_remove("QINC_SEED")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_gen(dir: &Path, seed: &str) -> Output {
    qinc(&["gen", "--zones", "8", "--duration", "200", "--incidents", "1", "--seed", seed, "--out", path_str(dir)])
}

#[test]
fn gen_writes_records_schedule_and_topology() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_gen(dir.path(), "3");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1600 rows"));

    let schedule: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
    let events = schedule.as_array().unwrap();
    assert_eq!(events.len(), 1);
    for key in ["zone", "start_s", "duration_s"] {
        assert!(events[0].get(key).is_some(), "missing {key}");
    }
    let header = fs::read_to_string(dir.path().join("bsm.csv")).unwrap();
    assert!(header.starts_with("time_s,vehicle_id,zone_id,speed_mps\n"));
    assert!(dir.path().join("topology.json").exists());
}

#[test]
fn gen_is_deterministic_per_seed_and_honors_env() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(small_gen(a.path(), "9").status.success());
    let env_run = Command::new(env!("CARGO_BIN_EXE_qinc"))
        .args(["gen", "--zones", "8", "--duration", "200", "--incidents", "1", "--out", path_str(b.path())])
        .env("QINC_SEED", "9")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    assert!(small_gen(c.path(), "10").status.success());

    let read = |d: &Path| fs::read(d.join("bsm.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn features_round_trip_from_gen_output() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_gen(dir.path(), "1").status.success());
    let bsm = dir.path().join("bsm.csv");
    let schedule = dir.path().join("schedule.json");
    let topology = dir.path().join("topology.json");
    let features = dir.path().join("features.csv");
    let out = qinc(&[
        "features",
        "--bsm",
        path_str(&bsm),
        "--schedule",
        path_str(&schedule),
        "--topology",
        path_str(&topology),
        "--duration",
        "200",
        "--out",
        path_str(&features),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_feature_csv(&features).unwrap();
    assert_eq!(rows.len(), 8 * 200);
    assert!(rows.iter().any(|r| r.label == 1));

    let minute = dir.path().join("minute.csv");
    let out = qinc(&[
        "features", "--bsm", path_str(&bsm), "--zones", "8", "--bucket", "60", "--out", path_str(&minute),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let rows = read_feature_csv(&minute).unwrap();
    assert!(rows.iter().all(|r| r.label == 0));
    assert_eq!(rows.len() % 8, 0);
}

#[test]
fn malformed_bsm_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bsm = dir.path().join("bad.csv");
    fs::write(&bsm, "time_s,vehicle_id,zone_id,speed_mps\n0,a,0,12.5\n1,b,zero,3.0\n").unwrap();
    let out = qinc(&["features", "--bsm", path_str(&bsm), "--zones", "2", "--out", path_str(&dir.path().join("f.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = qinc(&["features", "--bsm", path_str(&missing)]);
    assert_eq!(out.status.code(), Some(3));

    let out = qinc(&["experiment", "--models", "perceptron", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = qinc(&["experiment", "--splits", "DS-9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = qinc(&["gen", "--zones", "0", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = qinc(&["gradcheck", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);

    let out = qinc(&["gradcheck", "--seed", "4", "--corrupt-gradient"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL parameter-shift exactness"));
}

fn small_experiment() -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioConfig {
            n_zones: 8,
            duration_s: 300,
            ..ScenarioConfig::default()
        },
        splits: vec![SplitName::Ds2, SplitName::Ds3],
        models: vec!["classical".into(), "hybrid-2q".into()],
        n_runs: 2,
        ..ExperimentConfig::default()
    }
}

#[test]
fn experiment_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_experiment();
    config.train.epochs = 2;
    cmd_experiment(&config, dir.path()).unwrap();

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["partial"], false);
    assert_eq!(report["config"]["scenario"]["n_zones"], 8);
    let splits = report["splits"].as_array().unwrap();
    assert_eq!(splits.len(), 2);
    assert_eq!(splits[1]["split"], "DS-3");
    for split in splits {
        assert_eq!(split["n_runs"], 2);
        let models = split["models"].as_array().unwrap();
        assert_eq!(models[0]["kind"], "classical");
        assert!(models[0].get("qubits").is_none());
        assert_eq!(models[1]["qubits"], 2);
        for m in models {
            for key in ["mean_counts", "mean_metrics", "defined_runs", "per_run"] {
                assert!(m.get(key).is_some(), "missing {key}");
            }
            assert_eq!(m["per_run"].as_array().unwrap().len(), 2);
        }
    }
    let tables = fs::read_to_string(dir.path().join("tables.txt")).unwrap();
    assert!(tables.contains("Comparison of Model Performance for DS-2"));
    assert!(tables.contains("Hybrid (2 qubits)"));
}

#[test]
fn experiment_flags_override_config_file_and_jobs_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_experiment();
    config.splits = vec![SplitName::Ds3];
    config.train.epochs = 7;
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();

    let run = |out: &Path, jobs: &str| {
        let o = qinc(&[
            "experiment",
            "--config",
            path_str(&config_path),
            "--epochs",
            "2",
            "--jobs",
            jobs,
            "--out",
            path_str(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut v: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        v["config"]["jobs"] = Value::Null;
        v
    };
    let serial = run(&dir.path().join("a"), "1");
    let parallel = run(&dir.path().join("b"), "2");
    assert_eq!(serial["config"]["train"]["epochs"], 2);
    assert_eq!(serial["config"]["n_runs"], 2);
    assert_eq!(serial, parallel);
}

#[test]
fn failed_experiment_leaves_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_experiment();
    config.train.epochs = 1;
    // DS-3 regenerates at its own length and succeeds; DS-2 cannot fit an
    // incident into 2 s.
    config.scenario.n_zones = 2;
    config.scenario.duration_s = 2;
    config.splits = vec![SplitName::Ds3, SplitName::Ds2];
    let err = cmd_experiment(&config, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Core(_)));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["partial"], true);
    assert!(report["error"].is_string());
    assert_eq!(report["splits"][0]["models"].as_array().unwrap().len(), 2);
}

#[test]
fn gen_summary_matches_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig {
        n_zones: 6,
        duration_s: 120,
        ..ScenarioConfig::default()
    };
    let s = cmd_gen(&config, dir.path()).unwrap();
    assert_eq!(s.rows, 6 * 120);
    let lines = fs::read_to_string(dir.path().join("bsm.csv")).unwrap().lines().count();
    assert_eq!(lines, s.records + 1);
}
